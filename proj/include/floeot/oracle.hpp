#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "floeot/otcore.hpp"
#include "floeot/raster.hpp"

namespace floeot {

/// Largest problem the exact solver accepts.
inline constexpr std::size_t kOracleLimit = 256;

/// Optimal unregularized transport plan.
struct ExactPlan {
  double value = 0.0;
  std::size_t n = 0;
  std::vector<double> plan;  // n x n, row-major
  int iterations = 0;        // simplex pivots
  /// Dual potentials with c_ij - row_i - col_j >= 0 everywhere and == 0 on
  /// the basis (complementary slackness).
  std::vector<double> row_potential;
  std::vector<double> col_potential;

  double operator()(std::size_t i, std::size_t j) const { return plan[i * n + j]; }
};

/// Solves min sum c_ij g_ij subject to row sums a, column sums b, g >= 0 with
/// the transportation simplex (north-west corner start, MODI potentials,
/// Bland's rule on entering and leaving cells).
///
/// Throws ScaleError above kOracleLimit and BalanceError when the marginals'
/// totals differ by more than 1e-9.
ExactPlan exact_transport(std::span<const double> a, std::span<const double> b,
                          std::span<const double> cost);

ExactPlan exact_wasserstein(const MassField& p, const MassField& q, const CostMatrix& cost);

}  // namespace floeot
