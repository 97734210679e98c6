#include <cmath>
#include <numbers>

#include "doctest.h"
#include "floeot/errors.hpp"
#include "floeot/fields.hpp"
#include "floeot/synth.hpp"
#include "support.hpp"

using namespace floeot;

namespace {

VelocityField field_from(const GridGeometry& g, auto&& fn) {
  VelocityField v;
  v.dt = 86400.0;
  v.vx.resize(g.size());
  v.vy.resize(g.size());
  v.valid.assign(g.size(), 1);
  for (int r = 0; r < g.height(); ++r)
    for (int c = 0; c < g.width(); ++c) {
      const auto [vx, vy] = fn(c * g.pixel_size(), r * g.pixel_size());
      v.vx[g.index(c, r)] = vx;
      v.vy[g.index(c, r)] = vy;
    }
  return v;
}

// Sum_i p_i target_i against sum_j q_j x_j.
void check_center_of_mass(const MassField& p, const MassField& q, const BarycentricMap& map) {
  const auto& g = p.geometry();
  double px = 0, py = 0, qx = 0, qy = 0;
  for (int r = 0; r < g.height(); ++r)
    for (int c = 0; c < g.width(); ++c) {
      const std::size_t i = g.index(c, r);
      px += p.mass()[i] * map.target_x[i];
      py += p.mass()[i] * map.target_y[i];
      qx += q.mass()[i] * g.x_center(c);
      qy += q.mass()[i] * g.y_center(r);
    }
  CHECK(std::abs(px - qx) <= 1e-9);
  CHECK(std::abs(py - qy) <= 1e-9);
}

}  // namespace

TEST_SUITE("fields") {
  TEST_CASE("principal strain examples") {
    CHECK(principal_strain(2.0, -1.0, 0.0) == 2.0);
    CHECK(principal_strain(0.0, 0.0, 1.0) == 1.0);
    CHECK(principal_strain(-3.0, 1.0, 0.0) == -3.0);
    CHECK(principal_strain(0.0, 0.0, 0.0) == 0.0);
  }

  TEST_CASE("principal strain is rotation invariant and dominates the shear") {
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int k = 0; k < 200; ++k) {
      const double a = d(rng), b = d(rng), s = d(rng), th = std::numbers::pi * d(rng);
      const double c = std::cos(th), sn = std::sin(th);
      // R E R^T
      const double ra = c * c * a + 2 * c * sn * s + sn * sn * b;
      const double rb = sn * sn * a - 2 * c * sn * s + c * c * b;
      const double rs = (b - a) * c * sn + (c * c - sn * sn) * s;
      const double p0 = principal_strain(a, b, s);
      CHECK(std::abs(principal_strain(ra, rb, rs) - p0) <= 1e-12);
      CHECK(p0 * p0 >= s * s);
    }
  }

  TEST_CASE("principal strain clipping") {
    StrainField s;
    s.exx = {100.0, -100.0, 0.5};
    s.eyy = {0.0, 0.0, 0.0};
    s.exy = {0.0, 0.0, 0.0};
    s.valid = {1, 1, 1};
    const auto p = principal_strain(s, 50.0);
    CHECK(p == std::vector<double>{50.0, -50.0, 0.5});
    CHECK_THROWS_AS(principal_strain(s, 0.0), ParameterError);
  }

  TEST_CASE("strain of uniform, affine and rotating fields") {
    const GridGeometry g(9, 7, 250.0);
    const double dt = 86400.0;
    const auto uniform = strain(field_from(g, [](double, double) { return std::pair{0.3, -0.2}; }), g, dt);
    CHECK(testsupport::max_abs(uniform.exx) <= 1e-12);
    CHECK(testsupport::max_abs(uniform.eyy) <= 1e-12);
    CHECK(testsupport::max_abs(uniform.exy) <= 1e-12);

    const double a = 1e-6;
    const auto stretch = strain(field_from(g, [&](double x, double) { return std::pair{a * x, 0.0}; }), g, dt);
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(stretch.valid[i] == 1);
      CHECK(stretch.exx[i] == doctest::Approx(a * dt).epsilon(1e-12));
      CHECK(std::abs(stretch.eyy[i]) <= 1e-12);
      CHECK(std::abs(stretch.exy[i]) <= 1e-12);
    }

    const double b = 2e-7, c = -3e-7, e = 5e-7;
    const auto general = strain(
        field_from(g, [&](double x, double y) { return std::pair{a * x + b * y + 0.1, c * x + e * y - 0.2}; }), g, dt);
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(std::abs(general.exx[i] - a * dt) <= 1e-12);
      CHECK(std::abs(general.eyy[i] - e * dt) <= 1e-12);
      CHECK(std::abs(general.exy[i] - 0.5 * dt * (b + c)) <= 1e-12);
    }

    const double w = 1e-6;
    const auto spin = strain(field_from(g, [&](double x, double y) { return std::pair{-w * y, w * x}; }), g, dt);
    CHECK(testsupport::max_abs(spin.exx) <= 1e-12);
    CHECK(testsupport::max_abs(spin.eyy) <= 1e-12);
    CHECK(testsupport::max_abs(spin.exy) <= 1e-12);
  }

  TEST_CASE("strain is linear") {
    const GridGeometry g(8, 6, 100.0);
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    auto random_field = [&] { return field_from(g, [&](double, double) { return std::pair{d(rng), d(rng)}; }); };
    const auto v1 = random_field(), v2 = random_field();
    const double al = 0.7, be = -1.3, dt = 3600.0;
    VelocityField mix = v1;
    for (std::size_t i = 0; i < g.size(); ++i) {
      mix.vx[i] = al * v1.vx[i] + be * v2.vx[i];
      mix.vy[i] = al * v1.vy[i] + be * v2.vy[i];
    }
    const auto s1 = strain(v1, g, dt), s2 = strain(v2, g, dt), sm = strain(mix, g, dt);
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(sm.exx[i] == doctest::Approx(al * s1.exx[i] + be * s2.exx[i]).epsilon(1e-12).scale(1.0));
      CHECK(sm.eyy[i] == doctest::Approx(al * s1.eyy[i] + be * s2.eyy[i]).epsilon(1e-12).scale(1.0));
      CHECK(sm.exy[i] == doctest::Approx(al * s1.exy[i] + be * s2.exy[i]).epsilon(1e-12).scale(1.0));
      CHECK(sm.principal[i] == principal_strain(sm.exx[i], sm.eyy[i], sm.exy[i]));
    }
  }

  TEST_CASE("invalid pixels poison the stencils that touch them") {
    const GridGeometry g(7, 7, 1.0);
    auto v = field_from(g, [](double x, double y) { return std::pair{x, y}; });
    v.valid[g.index(3, 3)] = 0;
    const auto s = strain(v, g, 1.0);
    CHECK(s.valid[g.index(3, 3)] == 0);
    CHECK(s.valid[g.index(2, 3)] == 0);
    CHECK(s.valid[g.index(4, 3)] == 0);
    CHECK(s.valid[g.index(3, 2)] == 0);
    CHECK(s.valid[g.index(3, 4)] == 0);
    CHECK(s.valid[g.index(2, 2)] == 1);
    v.valid.assign(g.size(), 1);
    v.valid[g.index(2, 0)] = 0;  // used by the one-sided stencil at column 0
    CHECK(strain(v, g, 1.0).valid[g.index(0, 0)] == 0);
    CHECK_THROWS_AS(strain(v, g, 0.0), ParameterError);
    const GridGeometry tiny(2, 5, 1.0);
    CHECK_THROWS_AS(strain(field_from(tiny, [](double, double) { return std::pair{0.0, 0.0}; }), tiny, 1.0),
                    ParameterError);
  }

  TEST_CASE("velocity of the identity map is exactly zero") {
    const GridGeometry g(5, 4, 250.0);
    BarycentricMap map;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 5; ++c) {
        map.target_x.push_back(g.x_center(c));
        map.target_y.push_back(g.y_center(r));
      }
    map.valid.assign(g.size(), 1);
    const auto v = velocity(map, g, 86400.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(v.vx[i] == 0.0);
      CHECK(v.vy[i] == 0.0);
    }
    CHECK_THROWS_AS(velocity(map, g, 0.0), ParameterError);
    CHECK_THROWS_AS(velocity(map, g, -1.0), ParameterError);
  }

  TEST_CASE("single-pixel floe moved five pixels") {
    const int n = 16;
    std::vector<double> a(n * n, 0.0), b(n * n, 0.0);
    a[8 * n + 4] = 255.0;
    b[8 * n + 9] = 255.0;
    const auto p = testsupport::mass_from(n, n, a), q = testsupport::mass_from(n, n, b);
    const auto pair = sinkhorn(p, q, KernelSpec::dense(1e-2));
    REQUIRE(pair.converged);
    const auto v = velocity(barycentric_map(p, pair), p.geometry(), 86400.0);
    const std::size_t i = 8 * n + 4;
    CHECK(v.valid[i] == 1);
    CHECK(v.vx[i] == doctest::Approx(5 * 250.0 / 86400.0).epsilon(1e-6));
    CHECK(std::abs(v.vy[i]) <= 1e-9);
    CHECK(testsupport::max_abs(std::vector<double>(v.valid.begin(), v.valid.end())) == 1.0);
    int valid = 0;
    for (auto x : v.valid) valid += x;
    CHECK(valid == 1);  // every other pixel carries floor mass only
  }

  TEST_CASE("near-pure swap: cbar and barycentric target") {
    const auto p = testsupport::mass_from(2, 1, {255, 0}), q = testsupport::mass_from(2, 1, {0, 255});
    SinkhornOptions o;
    o.log_domain = true;
    const auto pair = sinkhorn(p, q, KernelSpec::dense(1e-4), o);
    const auto ts = transport_distance(p, q, pair);
    CHECK(ts.cbar[0] == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(ts.valid[0] == 1);
    CHECK(ts.valid[1] == 0);
    const auto map = barycentric_map(p, pair);
    CHECK(map.target_x[0] == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(map.target_y[0] == doctest::Approx(0.25).epsilon(1e-9));
  }

  TEST_CASE("p = q uniform, eps 1e-4: small cbar, fixed interior targets") {
    const auto p = testsupport::mass_from(16, 16, std::vector<double>(256, 200.0));
    const auto pair = sinkhorn(p, p, KernelSpec::dense(1e-4));
    REQUIRE(pair.converged);
    const auto ts = transport_distance(p, p, pair);
    double worst = 0.0;
    for (std::size_t i = 0; i < 256; ++i) {
      CHECK(ts.valid[i] == 1);
      CHECK(ts.cbar[i] >= 0.0);
      worst = std::max(worst, ts.cbar[i]);
    }
    CHECK(worst <= 10 * 1e-4);

    const auto map = barycentric_map(p, pair);
    const GridGeometry& g = p.geometry();
    for (int r = 3; r < 13; ++r)
      for (int c = 3; c < 13; ++c) {
        CHECK(std::abs(map.target_x[g.index(c, r)] - g.x_center(c)) <= 1e-6);
        CHECK(std::abs(map.target_y[g.index(c, r)] - g.y_center(r)) <= 1e-6);
      }
  }

  TEST_CASE("center-of-mass identity and dense/convolutional agreement") {
    for (double eps : {1e-3, 1e-2}) {
      for (unsigned seed = 1; seed <= 3; ++seed) {
        const auto p = testsupport::random_mass(16, 16, seed);
        const auto q = testsupport::random_mass(16, 16, seed + 40);
        SinkhornOptions o;
        o.max_iter = 5000;
        const auto dense = sinkhorn(p, q, KernelSpec::dense(eps), o);
        const auto conv = sinkhorn(p, q, KernelSpec::convolutional(eps, p.geometry()), o);
        REQUIRE(dense.converged);
        REQUIRE(conv.converged);
        const auto md = barycentric_map(p, dense), mc = barycentric_map(p, conv);
        check_center_of_mass(p, q, md);
        check_center_of_mass(p, q, mc);
        CHECK(testsupport::rel_inf(mc.target_x, md.target_x) <= 1e-6);
        CHECK(testsupport::rel_inf(mc.target_y, md.target_y) <= 1e-6);
        const auto td = transport_distance(p, q, dense), tc = transport_distance(p, q, conv);
        CHECK(testsupport::rel_inf(tc.cbar, td.cbar) <= 1e-6);
        CHECK(std::abs(tc.w_eps - td.w_eps) <= 1e-6 * std::abs(td.w_eps));
      }
    }
  }

  TEST_CASE("cbar matches explicit coupling sums") {
    const auto p = testsupport::random_mass(5, 4, 1);
    const auto q = testsupport::random_mass(5, 4, 2);
    const auto pair = sinkhorn(p, q, KernelSpec::dense(2e-2));
    const auto gamma = testsupport::explicit_coupling(pair, p.geometry());
    const auto ts = transport_distance(p, q, pair);
    for (std::size_t i = 0; i < 20; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 20; ++j) s += gamma[i * 20 + j] * testsupport::cost_between(p.geometry(), i, j);
      CHECK(ts.cbar[i] == doctest::Approx(s / p.mass()[i]).epsilon(1e-10));
    }
    const auto phys = ts.physical(p.geometry(), 86400.0);
    CHECK(phys[3] == doctest::Approx(std::sqrt(ts.cbar[3]) * 5 * 250.0 / 86400.0));
  }

  TEST_CASE("low-mass and non-ice pixels are not reportable") {
    const IntensityRaster r(GridGeometry(4, 1, 1.0), {0, 100, 200, 250});
    const auto m = normalize_to_mass(r, 1e-10, apply_ice_mask(r));
    CHECK(reportable_pixels(m) == Mask{0, 0, 1, 1});
  }

  TEST_CASE("32x32 dense pre-validation of the velocity tolerance") {
    Scenario sc = Scenario::make(ScenarioKind::translate, 32, FloeShape::block);
    sc.floe.center_x = 12.0;
    sc.floe.center_y = 16.0;
    sc.floe.radius = 5.0;
    sc.motion.dx = 2.0;
    const auto a = render(sc, 0.0), b = render(sc, 1.0);
    const auto p = normalize_to_mass(a, 1e-10, apply_ice_mask(a));
    const auto q = normalize_to_mass(b, 1e-10, apply_ice_mask(b));
    const auto pair = sinkhorn(p, q, KernelSpec::dense(1e-3));
    REQUIRE(pair.converged);
    const auto v = velocity(barycentric_map(p, pair), p.geometry(), sc.duration);
    const GridGeometry& g = p.geometry();
    std::vector<double> err;
    for (int r = 1; r < 31; ++r)
      for (int c = 1; c < 31; ++c) {
        auto ice = [&](int cc, int rr) { return a.at(cc, rr) > 120; };
        if (!(ice(c, r) && ice(c - 1, r) && ice(c + 1, r) && ice(c, r - 1) && ice(c, r + 1))) continue;
        const std::size_t i = g.index(c, r);
        REQUIRE(v.valid[i] == 1);
        err.push_back(std::hypot(v.vx[i] * sc.duration - 2 * 250.0, v.vy[i] * sc.duration));
      }
    REQUIRE(err.size() >= 40);
    CHECK(testsupport::median(err) <= 250.0);
  }
}
