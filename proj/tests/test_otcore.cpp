#include <cmath>
#include <numeric>

#include "doctest.h"
#include "floeot/errors.hpp"
#include "floeot/otcore.hpp"
#include "support.hpp"

using namespace floeot;
using testsupport::rel_inf;

namespace {

// p = [1 - d, d], q = [d, 1 - d] with d at floor scale.
std::pair<MassField, MassField> near_pure_swap() {
  return {testsupport::mass_from(2, 1, {255, 0}), testsupport::mass_from(2, 1, {0, 255})};
}

SinkhornOptions tight(double tol = 1e-12, int max_iter = 100000) {
  SinkhornOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  return o;
}

}  // namespace

TEST_SUITE("otcore") {
  TEST_CASE("cost matrix examples") {
    const auto c12 = build_cost(GridGeometry(2, 1, 1.0));
    CHECK(c12(0, 0) == 0.0);
    CHECK(c12(0, 1) == doctest::Approx(0.25));
    CHECK(c12(1, 0) == doctest::Approx(0.25));

    const auto c22 = build_cost(GridGeometry(2, 2, 1.0));
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(c22(i, i) == 0.0);
      for (std::size_t j = 0; j < 4; ++j) {
        if (i == j) continue;
        const double c = c22(i, j);
        CHECK((std::abs(c - 0.25) < 1e-15 || std::abs(c - 0.5) < 1e-15));
      }
    }

    const GridGeometry g(7, 5, 1.0);
    const auto c = build_cost(g);
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j) {
        CHECK(c(i, j) == c(j, i));
        CHECK(c(i, j) >= 0.0);
        CHECK(c(i, j) <= 2.0);
        CHECK(c(i, j) == doctest::Approx(testsupport::cost_between(g, i, j)).epsilon(1e-14));
      }
    CHECK_THROWS_AS(build_cost(GridGeometry(65, 64, 1.0)), ScaleError);
  }

  TEST_CASE("kernel spec") {
    const GridGeometry g(40, 30, 1.0);
    for (double eps : {1e-4, 1e-3, 1e-2}) {
      const int r = KernelSpec::required_radius(eps, g);
      const double h = g.pitch();
      CHECK(std::exp(-(r * h) * (r * h) / eps) <= 1e-16);
      CHECK(std::exp(-((r - 1) * h) * ((r - 1) * h) / eps) > 1e-16);
    }
    CHECK(KernelSpec::automatic(1e-3, GridGeometry(64, 64, 1.0)).mode == KernelMode::dense);
    CHECK(KernelSpec::automatic(1e-3, GridGeometry(65, 64, 1.0)).mode == KernelMode::convolutional);
    CHECK_THROWS_AS(KernelSpec::dense(0.0).validate(g), ParameterError);
    CHECK_THROWS_AS(KernelSpec::dense(1e-3).validate(GridGeometry(65, 64, 1.0)), ScaleError);
    KernelSpec bad = KernelSpec::convolutional(1e-3, g);
    bad.truncation_radius = 1;
    CHECK_THROWS(bad.validate(g));
  }

  TEST_CASE("kernel_apply: zero, deltas and random vectors") {
    const GridGeometry g(8, 8, 1.0);
    const auto dense = KernelSpec::dense(1e-2);
    const auto conv = KernelSpec::convolutional(1e-2, g);
    const std::vector<double> zero(64, 0.0);
    CHECK(testsupport::max_abs(kernel_apply(zero, dense, g)) == 0.0);
    CHECK(testsupport::max_abs(kernel_apply(zero, conv, g)) == 0.0);

    const auto cost = build_cost(g);
    for (std::size_t k = 0; k < 64; ++k) {
      std::vector<double> delta(64, 0.0);
      delta[k] = 1.0;
      const auto a = kernel_apply(delta, dense, g);
      const auto b = kernel_apply(delta, conv, g);
      std::vector<double> column(64);
      for (std::size_t i = 0; i < 64; ++i) column[i] = std::exp(-cost(i, k) / 1e-2);
      CHECK(rel_inf(a, column) <= 1e-14);
      CHECK(rel_inf(b, column) <= 1e-12);
    }

    const GridGeometry g16(16, 16, 1.0);
    const auto p = testsupport::random_mass(16, 16, 11);
    const auto a = kernel_apply(p.mass(), KernelSpec::dense(1e-3), g16);
    const auto b = kernel_apply(p.mass(), KernelSpec::convolutional(1e-3, g16), g16);
    CHECK(rel_inf(b, a) <= 1e-8);

    std::vector<double> bad(64, 1.0);
    bad[3] = INFINITY;
    CHECK_THROWS_AS(kernel_apply(bad, dense, g), NumericError);
    CHECK_THROWS_AS(kernel_apply(bad, conv, g), NumericError);
  }

  TEST_CASE("log-domain and moment kernel sums agree with explicit sums") {
    const GridGeometry g(9, 6, 1.0);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> d(-30.0, 30.0);
    std::vector<double> lv(g.size());
    for (double& x : lv) x = d(rng);
    for (auto spec : {KernelSpec::dense(3e-2), KernelSpec::convolutional(3e-2, g)}) {
      const GibbsKernel k(spec, g);
      std::vector<double> out(g.size()), shift(g.size()), value(g.size());
      k.apply_log(lv, out);
      for (Moment mx : {Moment::zero, Moment::first, Moment::second}) {
        for (Moment my : {Moment::zero, Moment::first, Moment::second}) {
          k.apply_moment(lv, mx, my, shift, value);
          for (std::size_t i = 0; i < g.size(); ++i) {
            double ref = 0.0, scale = 0.0;
            for (std::size_t j = 0; j < g.size(); ++j) {
              const double dx = g.x_center(static_cast<int>(j % 9)) - g.x_center(static_cast<int>(i % 9));
              const double dy = g.y_center(static_cast<int>(j / 9)) - g.y_center(static_cast<int>(i / 9));
              const double e = std::exp(lv[j] - testsupport::cost_between(g, i, j) / 3e-2);
              ref += e * std::pow(dx, static_cast<int>(mx)) * std::pow(dy, static_cast<int>(my));
              scale += e;
            }
            const double got = std::exp(shift[i]) * value[i];
            CHECK(std::abs(got - ref) <= 1e-12 * scale);
            if (mx == Moment::zero && my == Moment::zero) {
              CHECK(out[i] == doctest::Approx(std::log(ref)).epsilon(1e-13));
            }
          }
        }
      }
    }
  }

  TEST_CASE("p = q converges to a symmetric fixed point") {
    const auto p = testsupport::random_mass(6, 6, 21);
    const GridGeometry& g = p.geometry();
    const auto pair = sinkhorn(p, p, KernelSpec::dense(1e-2), tight());
    CHECK(pair.converged);
    // u and w agree up to the gauge u -> c u, w -> w / c
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 0; i < g.size(); ++i) {
      lo = std::min(lo, pair.log_u[i] - pair.log_w[i]);
      hi = std::max(hi, pair.log_u[i] - pair.log_w[i]);
    }
    CHECK(hi - lo <= 1e-7);
    const auto gamma = dense_coupling(pair, build_cost(g));
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j) CHECK(std::abs(gamma(i, j) - gamma(j, i)) <= 1e-10);
  }

  TEST_CASE("p = q at default tolerance, 64x64, eps 1e-3") {
    const auto p = testsupport::random_mass(64, 64, 4);
    const auto pair = sinkhorn(p, p, KernelSpec::convolutional(1e-3, p.geometry()));
    CHECK(pair.converged);
    CHECK(pair.iterations <= 1000);
    CHECK(pair.residual <= 1e-6);
  }

  TEST_CASE("near-pure swap at eps 1e-4") {
    const auto [p, q] = near_pure_swap();
    SinkhornOptions plain;
    CHECK_THROWS_AS(sinkhorn(p, q, KernelSpec::dense(1e-4), plain), StabilizationError);
    try {
      sinkhorn(p, q, KernelSpec::dense(1e-4), plain);
    } catch (const StabilizationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("epsilon") != std::string::npos);
      CHECK(msg.find("log-domain") != std::string::npos);
    }

    SinkhornOptions logd;
    logd.log_domain = true;
    const auto pair = sinkhorn(p, q, KernelSpec::dense(1e-4), logd);
    CHECK(pair.converged);
    const auto cost = build_cost(p.geometry());
    const auto gamma = dense_coupling(pair, cost);
    CHECK(gamma(0, 1) + gamma(1, 0) >= 0.99);
    CHECK(gamma(0, 1) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(wasserstein_value(p, q, pair) == doctest::Approx(0.25).epsilon(1e-2));
    const auto rows = transport_cost_rows(p, pair);
    CHECK(rows[0] == doctest::Approx(0.25 * p.mass()[0]).epsilon(1e-6));
    const auto conv = sinkhorn(p, q, KernelSpec::convolutional(1e-4, p.geometry()), logd);
    CHECK(transport_cost_rows(p, conv)[0] == doctest::Approx(rows[0]).epsilon(1e-9));
  }

  TEST_CASE("uniform two-pixel coupling tends to the product measure") {
    const auto p = testsupport::mass_from(2, 1, {1, 1});
    // The symmetric coupling has diagonal a with a^2 / (1/2 - a)^2 = exp(2 c12 / eps).
    for (double eps : {1.0, 10.0}) {
      const auto pair = sinkhorn(p, p, KernelSpec::dense(eps), tight());
      const auto gamma = dense_coupling(pair, build_cost(p.geometry()));
      const double r = std::exp(0.25 / eps);
      const double a = 0.5 * r / (1.0 + r);
      CHECK(gamma(0, 0) == doctest::Approx(a).epsilon(1e-10));
      CHECK(gamma(0, 1) == doctest::Approx(0.5 - a).epsilon(1e-10));
    }
    const auto pair = sinkhorn(p, p, KernelSpec::dense(10.0), tight());
    const auto gamma = dense_coupling(pair, build_cost(p.geometry()));
    for (double x : gamma.entries()) CHECK(std::abs(x - 0.25) <= 1e-2);
  }

  TEST_CASE("random 3x3, eps 1e-2: marginals, dense vs convolutional") {
    for (unsigned seed = 1; seed <= 5; ++seed) {
      const auto p = testsupport::random_mass(3, 3, seed);
      const auto q = testsupport::random_mass(3, 3, seed + 100);
      // strongly diagonal kernel (pitch^2 / eps = 11): some draws need > 1000 iterations
      const auto a = sinkhorn(p, q, KernelSpec::dense(1e-2), tight(1e-6));
      const auto b = sinkhorn(p, q, KernelSpec::convolutional(1e-2, p.geometry()), tight(1e-6));
      CHECK(a.converged);
      CHECK(a.residual <= 1e-6);
      CHECK(a.iterations >= 1);
      CHECK(b.iterations == a.iterations);
      CHECK(rel_inf(b.log_u, a.log_u) <= 1e-12);
      CHECK(wasserstein_value(p, q, b) == doctest::Approx(wasserstein_value(p, q, a)).epsilon(1e-12));

      const auto gamma = dense_coupling(a, build_cost(p.geometry()));
      const auto rows = gamma.row_sums(), cols = gamma.col_sums();
      for (std::size_t i = 0; i < 9; ++i) {
        CHECK(std::abs(rows[i] - p.mass()[i]) <= 1e-6);
        CHECK(std::abs(cols[i] - q.mass()[i]) <= 1e-12);
      }
      const double total = std::accumulate(gamma.entries().begin(), gamma.entries().end(), 0.0);
      CHECK(std::abs(total - 1.0) <= 1e-9);
      for (double x : gamma.entries()) CHECK(x >= 0.0);
    }
  }

  TEST_CASE("dual value equals the primal objective") {
    for (unsigned seed = 1; seed <= 5; ++seed) {
      const auto p = testsupport::random_mass(3, 3, seed);
      const auto q = testsupport::random_mass(3, 3, seed + 50);
      const auto pair = sinkhorn(p, q, KernelSpec::dense(1e-2), tight());
      const double dual = wasserstein_value(p, q, pair);
      const double primal = testsupport::primal_objective(pair, p.geometry());
      CHECK(std::abs(dual - primal) <= 1e-9 * std::abs(primal));
    }
  }

  TEST_CASE("post-update marginals are exact and the residual decreases") {
    for (double eps : {1e-3, 1e-2}) {
      for (unsigned seed = 1; seed <= 3; ++seed) {
        const auto p = testsupport::random_mass(16, 16, seed);
        const auto q = testsupport::random_mass(16, 16, seed + 7);
        for (auto spec : {KernelSpec::dense(eps), KernelSpec::convolutional(eps, p.geometry())}) {
          for (bool logd : {false, true}) {
            SinkhornOptions o = tight(1e-6, 5000);
            o.log_domain = logd;
            const auto pair = sinkhorn(p, q, spec, o);
            CHECK(pair.converged);
            CHECK(pair.max_update_error_p <= 1e-12);
            CHECK(pair.max_update_error_q <= 1e-12);
            CHECK(pair.residual_monotone);
          }
        }
      }
    }
  }

  TEST_CASE("plain and log-domain iterations agree") {
    const auto p = testsupport::random_mass(12, 10, 8);
    const auto q = testsupport::random_mass(12, 10, 9);
    SinkhornOptions o = tight(1e-13);
    const auto a = sinkhorn(p, q, KernelSpec::dense(1e-2), o);
    o.log_domain = true;
    const auto b = sinkhorn(p, q, KernelSpec::dense(1e-2), o);
    CHECK(wasserstein_value(p, q, a) == doctest::Approx(wasserstein_value(p, q, b)).epsilon(1e-10));
  }

  TEST_CASE("W_eps symmetry") {
    for (unsigned seed = 1; seed <= 5; ++seed) {
      const auto p = testsupport::random_mass(8, 8, seed);
      const auto q = testsupport::random_mass(8, 8, seed + 30);
      const auto pq = sinkhorn(p, q, KernelSpec::dense(1e-2), tight());
      const auto qp = sinkhorn(q, p, KernelSpec::dense(1e-2), tight());
      CHECK(std::abs(wasserstein_value(p, q, pq) - wasserstein_value(q, p, qp)) <= 1e-9);
    }
  }

  TEST_CASE("translation equivariance") {
    const int n = 24, patch = 8;
    const auto a = testsupport::random_raster(patch, patch, 1, 50, 255);
    const auto b = testsupport::random_raster(patch, patch, 2, 50, 255);
    auto embed = [&](const IntensityRaster& src, int ox, int oy) {
      std::vector<double> v(n * n, 0.0);
      for (int y = 0; y < patch; ++y)
        for (int x = 0; x < patch; ++x) v[(oy + y) * n + ox + x] = src.at(x, y);
      return testsupport::mass_from(n, n, v);
    };
    const GridGeometry g(n, n, 1.0);
    const auto spec = KernelSpec::convolutional(1e-3, g);
    const int r = spec.truncation_radius;
    REQUIRE(r <= 5);
    auto w_at = [&](int ox, int oy) {
      const auto p = embed(a, ox, oy), q = embed(b, ox, oy);
      const auto pair = sinkhorn(p, q, spec, tight(1e-10));
      REQUIRE(pair.converged);
      return wasserstein_value(p, q, pair);
    };
    const double w0 = w_at(r, r);
    const double w1 = w_at(n - patch - r, n - patch - r - 1);
    CHECK(std::abs(w1 - w0) <= 1e-6 * std::abs(w0));
  }

  TEST_CASE("stale pairs are rejected unless accepted explicitly") {
    const auto p = testsupport::random_mass(5, 5, 1);
    const auto q = testsupport::random_mass(5, 5, 2);
    SinkhornOptions o;
    o.max_iter = 2;
    const auto pair = sinkhorn(p, q, KernelSpec::dense(1e-3), o);
    CHECK_FALSE(pair.converged);
    CHECK(pair.iterations == 2);
    const auto cost = build_cost(p.geometry());
    CHECK_THROWS_AS(dense_coupling(pair, cost), StalenessError);
    CHECK_THROWS_AS(wasserstein_value(p, q, pair), StalenessError);
    CHECK_THROWS_AS(transport_cost_rows(p, pair), StalenessError);
    CHECK_NOTHROW(wasserstein_value(p, q, pair, StalePolicy::accept));
  }

  TEST_CASE("max_iter is honored") {
    const auto p = testsupport::random_mass(10, 10, 1);
    const auto q = testsupport::random_mass(10, 10, 2);
    for (int cap : {1, 5, 17}) {
      SinkhornOptions o = tight(1e-300, cap);
      const auto pair = sinkhorn(p, q, KernelSpec::dense(1e-3), o);
      CHECK(pair.iterations == cap);
      CHECK_FALSE(pair.converged);
    }
  }

  TEST_CASE("solves are deterministic") {
    const auto p = testsupport::random_mass(20, 20, 1);
    const auto q = testsupport::random_mass(20, 20, 2);
    const auto spec = KernelSpec::convolutional(1e-3, p.geometry());
    const auto a = sinkhorn(p, q, spec);
    const auto b = sinkhorn(p, q, spec);
    CHECK(a.log_u == b.log_u);
    CHECK(a.log_w == b.log_w);
    CHECK(a.iterations == b.iterations);
  }

  TEST_CASE("grid mismatch is a parameter error") {
    const auto p = testsupport::random_mass(4, 4, 1);
    const auto q = testsupport::random_mass(4, 5, 2);
    CHECK_THROWS_AS(sinkhorn(p, q, KernelSpec::dense(1e-2)), ParameterError);
  }
}
