#include <cmath>
#include <string>

#include "floeot/errors.hpp"
#include "floeot/otcore.hpp"

namespace floeot {

void require_converged(const ScalingPair& pair, StalePolicy policy, std::string_view what) {
  if (!pair.converged && policy == StalePolicy::reject) {
    throw StalenessError(std::string(what) + ": Sinkhorn pair did not converge (" +
                         std::to_string(pair.iterations) + " iterations, residual " +
                         std::to_string(pair.residual) + ")");
  }
}

DenseCoupling::DenseCoupling(std::size_t n, std::vector<double> entries)
    : n_(n), entries_(std::move(entries)) {
  if (entries_.size() != n_ * n_) throw ParameterError("coupling must be square");
}

std::vector<double> DenseCoupling::row_sums() const {
  std::vector<double> s(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) s[i] += entries_[i * n_ + j];
  return s;
}

std::vector<double> DenseCoupling::col_sums() const {
  std::vector<double> s(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) s[j] += entries_[i * n_ + j];
  return s;
}

DenseCoupling dense_coupling(const ScalingPair& pair, const CostMatrix& cost, StalePolicy policy) {
  require_converged(pair, policy, "dense_coupling");
  const std::size_t n = cost.size();
  if (pair.log_u.size() != n) throw ParameterError("dense_coupling: pair and cost sizes differ");
  const double eps = pair.kernel.epsilon;
  std::vector<double> g(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      g[i * n + j] = std::exp(pair.log_u[i] + pair.log_w[j] - cost(i, j) / eps);
  return DenseCoupling(n, std::move(g));
}

double wasserstein_value(const MassField& p, const MassField& q, const ScalingPair& pair,
                         StalePolicy policy) {
  require_converged(pair, policy, "wasserstein_value");
  const auto pm = p.mass();
  const auto qm = q.mass();
  if (pm.size() != pair.log_u.size() || qm.size() != pair.log_w.size()) {
    throw ParameterError("wasserstein_value: size mismatch");
  }
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < pm.size(); ++i) a += pm[i] * pair.log_u[i];
  for (std::size_t j = 0; j < qm.size(); ++j) b += qm[j] * pair.log_w[j];
  return pair.kernel.epsilon * (a + b);
}

std::vector<double> coupling_moment(const ScalingPair& pair, const GibbsKernel& kernel, Moment mx,
                                    Moment my) {
  const std::size_t n = pair.log_u.size();
  if (n != kernel.geometry().size()) throw ParameterError("coupling_moment: size mismatch");
  std::vector<double> shift(n), value(n);
  kernel.apply_moment(pair.log_w, mx, my, shift, value);
  for (std::size_t i = 0; i < n; ++i) value[i] = std::exp(pair.log_u[i] + shift[i]) * value[i];
  return value;
}

std::vector<double> transport_cost_rows(const MassField& p, const ScalingPair& pair,
                                        StalePolicy policy) {
  return transport_cost_rows(p, pair, GibbsKernel(pair.kernel, p.geometry()), policy);
}

std::vector<double> transport_cost_rows(const MassField& p, const ScalingPair& pair,
                                        const GibbsKernel& kernel, StalePolicy policy) {
  require_converged(pair, policy, "transport_cost_rows");
  if (!p.geometry().same_shape(kernel.geometry())) {
    throw ParameterError("transport_cost_rows: grid mismatch");
  }
  // c_ij = (x_j - x_i)^2 + (y_j - y_i)^2: two centered second moments, which
  // avoids the cancellation of expanding around the origin.
  std::vector<double> rows = coupling_moment(pair, kernel, Moment::second, Moment::zero);
  const std::vector<double> ry = coupling_moment(pair, kernel, Moment::zero, Moment::second);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] += ry[i];
  return rows;
}

}  // namespace floeot
