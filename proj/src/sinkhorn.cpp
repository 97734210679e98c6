#include <algorithm>
#include <cmath>
#include <sstream>

#include "floeot/errors.hpp"
#include "floeot/otcore.hpp"

namespace floeot {

namespace {

[[noreturn]] void stabilization_failure(const char* which, int iteration, double epsilon) {
  std::ostringstream msg;
  msg << "sinkhorn: scaling vector " << which << " left the floating-point range at iteration "
      << iteration << " (epsilon = " << epsilon
      << "); increase epsilon or enable log-domain iteration";
  throw StabilizationError(msg.str());
}

// target / kv, elementwise, with range checks on the result.
void scale_update(std::span<const double> target, std::span<const double> kv,
                  std::span<double> out, const char* which, int iteration, double epsilon) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double s = target[i] / kv[i];
    if (!(s > 0.0) || !std::isfinite(s)) stabilization_failure(which, iteration, epsilon);
    out[i] = s;
  }
}

struct MarginalError {
  double max = 0.0;
  double sum = 0.0;
};

MarginalError marginal_error(std::span<const double> scale, std::span<const double> kv,
                             std::span<const double> target) {
  MarginalError e;
  for (std::size_t i = 0; i < scale.size(); ++i) {
    const double d = std::abs(scale[i] * kv[i] - target[i]);
    e.max = std::max(e.max, d);
    e.sum += d;
  }
  return e;
}

MarginalError log_marginal_error(std::span<const double> log_scale, std::span<const double> log_kv,
                                 std::span<const double> target) {
  MarginalError e;
  for (std::size_t i = 0; i < log_scale.size(); ++i) {
    const double d = std::abs(std::exp(log_scale[i] + log_kv[i]) - target[i]);
    e.max = std::max(e.max, d);
    e.sum += d;
  }
  return e;
}

// The l1 error of Sinkhorn iterates is nonincreasing in exact arithmetic; the
// slack absorbs rounding once it reaches the 1e-16 level.
void record_residual(ScalingPair& pair, const MarginalError& e, std::size_t n) {
  const auto& h = pair.l1_residual_history;
  const double slack = 1e-12 * (h.empty() ? 0.0 : h.back()) + 1e-16 * static_cast<double>(n);
  if (!h.empty() && e.sum > h.back() + slack) pair.residual_monotone = false;
  pair.residual_history.push_back(e.max);
  pair.l1_residual_history.push_back(e.sum);
  pair.residual = e.max;
}

ScalingPair linear_sinkhorn(std::span<const double> p, std::span<const double> q,
                            const GibbsKernel& kernel, const SinkhornOptions& opt) {
  const std::size_t n = p.size();
  const double eps = kernel.spec().epsilon;
  std::vector<double> u(n, 1.0), w(n), kv(n), u_new(n);

  ScalingPair pair;
  kernel.apply(u, kv);
  scale_update(q, kv, w, "w", 0, eps);

  bool stop = false;
  for (int it = 1; it <= opt.max_iter; ++it) {
    kernel.apply(w, kv);
    if (it > 1) {
      record_residual(pair, marginal_error(u, kv, p), n);
      if (pair.u_change < opt.tol && pair.residual <= opt.tol) {
        stop = true;
        break;
      }
    }
    scale_update(p, kv, u_new, "u", it, eps);
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(u_new[i] - u[i]) * kv[i]);
    u.swap(u_new);
    pair.u_change = change;
    pair.max_update_error_p = std::max(pair.max_update_error_p, marginal_error(u, kv, p).max);
    pair.iterations = it;

    kernel.apply(u, kv);
    scale_update(q, kv, w, "w", it, eps);
    pair.max_update_error_q = std::max(pair.max_update_error_q, marginal_error(w, kv, q).max);
  }
  if (!stop) {
    kernel.apply(w, kv);
    record_residual(pair, marginal_error(u, kv, p), n);
  }
  pair.converged = pair.u_change < opt.tol && pair.residual <= opt.tol;

  pair.log_u.resize(n);
  pair.log_w.resize(n);
  std::transform(u.begin(), u.end(), pair.log_u.begin(), [](double x) { return std::log(x); });
  std::transform(w.begin(), w.end(), pair.log_w.begin(), [](double x) { return std::log(x); });
  return pair;
}

ScalingPair log_sinkhorn(std::span<const double> p, std::span<const double> q,
                         const GibbsKernel& kernel, const SinkhornOptions& opt) {
  const std::size_t n = p.size();
  const double eps = kernel.spec().epsilon;
  std::vector<double> log_p(n), log_q(n);
  std::transform(p.begin(), p.end(), log_p.begin(), [](double x) { return std::log(x); });
  std::transform(q.begin(), q.end(), log_q.begin(), [](double x) { return std::log(x); });

  std::vector<double> lu(n, 0.0), lw(n), lk(n), lu_new(n);
  auto update = [&](std::span<const double> log_target, std::span<double> out, const char* which,
                    int it) {
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = log_target[i] - lk[i];
      if (!std::isfinite(out[i])) stabilization_failure(which, it, eps);
    }
  };

  ScalingPair pair;
  kernel.apply_log(lu, lk);
  update(log_q, lw, "w", 0);

  bool stop = false;
  for (int it = 1; it <= opt.max_iter; ++it) {
    kernel.apply_log(lw, lk);
    if (it > 1) {
      record_residual(pair, log_marginal_error(lu, lk, p), n);
      if (pair.u_change < opt.tol && pair.residual <= opt.tol) {
        stop = true;
        break;
      }
    }
    update(log_p, lu_new, "u", it);
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(std::expm1(lu_new[i] - lu[i])) * std::exp(lu[i] + lk[i]));
    lu.swap(lu_new);
    pair.u_change = change;
    pair.max_update_error_p = std::max(pair.max_update_error_p, log_marginal_error(lu, lk, p).max);
    pair.iterations = it;

    kernel.apply_log(lu, lk);
    update(log_q, lw, "w", it);
    pair.max_update_error_q = std::max(pair.max_update_error_q, log_marginal_error(lw, lk, q).max);
  }
  if (!stop) {
    kernel.apply_log(lw, lk);
    record_residual(pair, log_marginal_error(lu, lk, p), n);
  }
  pair.converged = pair.u_change < opt.tol && pair.residual <= opt.tol;
  pair.log_u = std::move(lu);
  pair.log_w = std::move(lw);
  return pair;
}

}  // namespace

std::vector<double> ScalingPair::u() const {
  std::vector<double> out(log_u.size());
  std::transform(log_u.begin(), log_u.end(), out.begin(), [](double x) { return std::exp(x); });
  return out;
}

std::vector<double> ScalingPair::w() const {
  std::vector<double> out(log_w.size());
  std::transform(log_w.begin(), log_w.end(), out.begin(), [](double x) { return std::exp(x); });
  return out;
}

ScalingPair sinkhorn(const MassField& p, const MassField& q, const KernelSpec& kernel,
                     const SinkhornOptions& options) {
  return sinkhorn(p, q, GibbsKernel(kernel, p.geometry()), options);
}

ScalingPair sinkhorn(const MassField& p, const MassField& q, const GibbsKernel& kernel,
                     const SinkhornOptions& options) {
  if (!p.geometry().same_shape(q.geometry()) || !p.geometry().same_shape(kernel.geometry())) {
    throw ParameterError("sinkhorn: source, target and kernel grids differ");
  }
  if (!(options.tol > 0.0)) throw ParameterError("sinkhorn: tolerance must be positive");
  if (options.max_iter < 1) throw ParameterError("sinkhorn: max_iter must be >= 1");

  ScalingPair pair = options.log_domain ? log_sinkhorn(p.mass(), q.mass(), kernel, options)
                                        : linear_sinkhorn(p.mass(), q.mass(), kernel, options);
  pair.log_domain = options.log_domain;
  pair.kernel = kernel.spec();
  pair.tol = options.tol;
  return pair;
}

}  // namespace floeot
