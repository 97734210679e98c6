#include "floeot/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "floeot/errors.hpp"

namespace floeot {

namespace {

constexpr double kReducedCostTol = 1e-12;

// Basis of the transportation problem as a spanning tree over m row nodes
// (0..m-1) and n column nodes (m..m+n-1). Each basic cell is an edge.
class TransportBasis {
 public:
  TransportBasis(std::size_t m, std::size_t n) : m_(m), n_(n) {}

  void add(std::size_t i, std::size_t j) { cells_.push_back(i * n_ + j); }
  void replace(std::size_t leaving, std::size_t entering) {
    *std::find(cells_.begin(), cells_.end(), leaving) = entering;
  }
  const std::vector<std::size_t>& cells() const { return cells_; }

  // Potentials with row_0 = 0 and row_i + col_j = c_ij on every basic cell.
  void potentials(std::span<const double> cost, std::vector<double>& row,
                  std::vector<double>& col) const {
    build_adjacency();
    std::vector<double> pot(m_ + n_, 0.0);
    std::vector<char> seen(m_ + n_, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t cell : adj_[node]) {
        const std::size_t i = cell / n_, j = cell % n_;
        const std::size_t other = node < m_ ? m_ + j : i;
        if (seen[other]) continue;
        seen[other] = 1;
        pot[other] = cost[cell] - pot[node];
        stack.push_back(other);
      }
    }
    row.assign(pot.begin(), pot.begin() + static_cast<std::ptrdiff_t>(m_));
    col.assign(pot.begin() + static_cast<std::ptrdiff_t>(m_), pot.end());
  }

  // Basic cells on the tree path from row node i to column node j, in order.
  std::vector<std::size_t> path(std::size_t i, std::size_t j) const {
    build_adjacency();
    const std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> via(m_ + n_, none);  // cell used to reach node
    std::vector<char> seen(m_ + n_, 0);
    std::vector<std::size_t> queue{i};
    seen[i] = 1;
    for (std::size_t h = 0; h < queue.size(); ++h) {
      const std::size_t node = queue[h];
      if (node == m_ + j) break;
      for (std::size_t cell : adj_[node]) {
        const std::size_t other = node < m_ ? m_ + cell % n_ : cell / n_;
        if (seen[other]) continue;
        seen[other] = 1;
        via[other] = cell;
        queue.push_back(other);
      }
    }
    std::vector<std::size_t> out;
    for (std::size_t node = m_ + j; node != i;) {
      const std::size_t cell = via[node];
      out.push_back(cell);
      node = node < m_ ? m_ + cell % n_ : cell / n_;
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  void build_adjacency() const {
    adj_.assign(m_ + n_, {});
    for (std::size_t cell : cells_) {
      adj_[cell / n_].push_back(cell);
      adj_[m_ + cell % n_].push_back(cell);
    }
  }

  std::size_t m_, n_;
  std::vector<std::size_t> cells_;
  mutable std::vector<std::vector<std::size_t>> adj_;
};

}  // namespace

ExactPlan exact_transport(std::span<const double> a, std::span<const double> b,
                          std::span<const double> cost) {
  const std::size_t n = a.size();
  if (n > kOracleLimit) {
    throw ScaleError("exact solver limited to " + std::to_string(kOracleLimit) + " pixels");
  }
  if (n < 1 || b.size() != n || cost.size() != n * n) {
    throw ParameterError("exact_transport: inconsistent sizes");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(a[i] >= 0.0) || !(b[i] >= 0.0)) throw ParameterError("marginals must be nonnegative");
  }
  const double sa = std::accumulate(a.begin(), a.end(), 0.0);
  const double sb = std::accumulate(b.begin(), b.end(), 0.0);
  if (std::abs(sa - sb) > 1e-9) {
    throw BalanceError("marginal totals differ: " + std::to_string(sa) + " vs " + std::to_string(sb));
  }

  // North-west corner start: a staircase of exactly 2n - 1 cells, which is a
  // spanning tree even when some allocations are zero.
  ExactPlan out;
  out.n = n;
  out.plan.assign(n * n, 0.0);
  TransportBasis basis(n, n);
  {
    std::vector<double> ra(a.begin(), a.end()), rb(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    while (true) {
      const double x = std::min(ra[i], rb[j]);
      out.plan[i * n + j] = x;
      basis.add(i, j);
      ra[i] -= x;
      rb[j] -= x;
      if (i == n - 1 && j == n - 1) break;
      if (i == n - 1) {
        ++j;
      } else if (j == n - 1) {
        ++i;
      } else if (ra[i] <= rb[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  std::vector<double> row, col;
  const int max_pivots = 50 * static_cast<int>(n * n) + 1000;
  for (;;) {
    basis.potentials(cost, row, col);
    // Bland: first improving cell in index order.
    std::size_t entering = n * n;
    for (std::size_t cell = 0; cell < n * n; ++cell) {
      if (cost[cell] - row[cell / n] - col[cell % n] < -kReducedCostTol) {
        entering = cell;
        break;
      }
    }
    if (entering == n * n) break;
    if (out.iterations >= max_pivots) throw NumericError("exact solver did not terminate");

    const std::size_t ei = entering / n, ej = entering % n;
    const std::vector<std::size_t> cycle = basis.path(ei, ej);
    // Cells alternate -, +, -, ... starting from the one touching the entering
    // row; the path has odd length, so both ends lose flow.
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = n * n;
    for (std::size_t k = 0; k < cycle.size(); k += 2) {
      const double f = out.plan[cycle[k]];
      if (f < theta || (f == theta && cycle[k] < leaving)) {
        theta = f;
        leaving = cycle[k];
      }
    }
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      out.plan[cycle[k]] += (k % 2 == 0) ? -theta : theta;
    }
    out.plan[entering] += theta;
    out.plan[leaving] = 0.0;
    basis.replace(leaving, entering);
    ++out.iterations;
  }

  // Complementary slackness: basic cells are tight by construction of the
  // potentials; every cell must have nonnegative reduced cost.
  double scale = 1.0;
  for (double c : cost) scale = std::max(scale, std::abs(c));
  for (std::size_t cell = 0; cell < n * n; ++cell) {
    const double r = cost[cell] - row[cell / n] - col[cell % n];
    if (r < -1e-9 * scale) throw NumericError("exact solver: dual infeasible at termination");
    if (out.plan[cell] < -1e-12) throw NumericError("exact solver: negative flow at termination");
    out.plan[cell] = std::max(0.0, out.plan[cell]);
  }
  for (std::size_t cell : basis.cells()) {
    if (std::abs(cost[cell] - row[cell / n] - col[cell % n]) > 1e-9 * scale) {
      throw NumericError("exact solver: basis potentials inconsistent");
    }
  }
  out.value = 0.0;
  for (std::size_t cell = 0; cell < n * n; ++cell) out.value += cost[cell] * out.plan[cell];
  out.row_potential = std::move(row);
  out.col_potential = std::move(col);
  return out;
}

ExactPlan exact_wasserstein(const MassField& p, const MassField& q, const CostMatrix& cost) {
  if (!p.geometry().same_shape(q.geometry()) || !p.geometry().same_shape(cost.geometry())) {
    throw ParameterError("exact_wasserstein: grids differ");
  }
  if (p.mass().size() > kOracleLimit) {
    throw ScaleError("exact solver limited to " + std::to_string(kOracleLimit) + " pixels");
  }
  return exact_transport(p.mass(), q.mass(), cost.entries());
}

}  // namespace floeot
