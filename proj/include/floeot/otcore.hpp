#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "floeot/raster.hpp"

namespace floeot {

/// Largest grid (in pixels) for which explicit N x N matrices are built.
inline constexpr std::size_t kDenseLimit = 4096;

enum class KernelMode { dense, convolutional };

std::string_view to_string(KernelMode mode);

/// The Gibbs kernel xi = exp(-c / epsilon) for the squared-Euclidean cost on
/// normalized pixel centers.
///
/// epsilon is measured in squared normalized units (the longer grid axis has
/// length one), so the same epsilon means the same relative blur at any
/// resolution. In convolutional mode the separable 1-D taps exp(-(k h)^2 / eps)
/// are cut at `truncation_radius` pixels, chosen so the outermost tap is at most
/// 1e-16 of the central one.
struct KernelSpec {
  double epsilon = 1e-3;
  KernelMode mode = KernelMode::dense;
  int truncation_radius = 1;

  static KernelSpec dense(double epsilon);
  static KernelSpec convolutional(double epsilon, const GridGeometry& geometry);
  /// dense when the grid has at most kDenseLimit pixels, convolutional otherwise
  static KernelSpec automatic(double epsilon, const GridGeometry& geometry);

  /// Smallest radius (pixels) whose boundary tap is <= 1e-16 of the center.
  static int required_radius(double epsilon, const GridGeometry& geometry);
  void validate(const GridGeometry& geometry) const;
};

/// Dense squared-Euclidean cost between normalized pixel centers.
class CostMatrix {
 public:
  const GridGeometry& geometry() const { return geometry_; }
  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  std::span<const double> entries() const { return entries_; }

 private:
  friend CostMatrix build_cost(const GridGeometry& geometry);
  CostMatrix(GridGeometry geometry, std::vector<double> entries)
      : geometry_(geometry), n_(geometry.size()), entries_(std::move(entries)) {}

  GridGeometry geometry_;
  std::size_t n_;
  std::vector<double> entries_;
};

/// Throws ScaleError above kDenseLimit pixels.
CostMatrix build_cost(const GridGeometry& geometry);

/// Weight attached to each kernel tap as a function of the signed offset
/// d = x_j - x_i (normalized units) along one axis: 1, d or d^2.
enum class Moment { zero = 0, first = 1, second = 2 };

/// Application of the Gibbs kernel to grid vectors.
///
/// All three entry points evaluate sums of the form
///   sum_j xi_ij * m_x(x_j - x_i) * m_y(y_j - y_i) * v_j
/// either in the linear domain or with v given through its logarithm.
class GibbsKernel {
 public:
  GibbsKernel(const KernelSpec& spec, const GridGeometry& geometry);

  const KernelSpec& spec() const { return spec_; }
  const GridGeometry& geometry() const { return geometry_; }

  /// out = xi v. Throws NumericError if v has non-finite entries.
  void apply(std::span<const double> v, std::span<double> out) const;

  /// out = log(xi exp(log_v)), evaluated with per-pixel max shifts so that
  /// neither exp(log_v) nor the kernel entries need to be representable.
  void apply_log(std::span<const double> log_v, std::span<double> out) const;

  /// Moment-weighted sum returned as exp(shift) * value. `value` can be signed
  /// for first moments.
  void apply_moment(std::span<const double> log_v, Moment mx, Moment my,
                    std::span<double> shift, std::span<double> value) const;

 private:
  void dense_moment(std::span<const double> log_v, Moment mx, Moment my,
                    std::span<double> shift, std::span<double> value) const;
  void conv_moment(std::span<const double> log_v, Moment mx, Moment my,
                   std::span<double> shift, std::span<double> value) const;

  KernelSpec spec_;
  GridGeometry geometry_;
  int radius_ = 0;                   // effective 1-D reach, clipped to the grid
  std::vector<double> taps_;         // exp(-(k h)^2 / eps), k = 0..radius_
  std::vector<double> log_taps_;     // -(k h)^2 / eps
  std::vector<double> dense_;        // N x N Gibbs matrix (dense mode only)
};

/// Convenience wrapper: xi v for one vector.
std::vector<double> kernel_apply(std::span<const double> v, const KernelSpec& kernel,
                                 const GridGeometry& geometry);

// ---------------------------------------------------------------------------

struct SinkhornOptions {
  double tol = 1e-6;
  int max_iter = 1000;
  /// Iterate on log u, log w with log-sum-exp kernel sums. Needed when
  /// exp(-c/eps) underflows between pixels that must exchange mass.
  bool log_domain = false;
};

/// Converged (or last) Sinkhorn scaling vectors. The coupling is
/// gamma = diag(u) xi diag(w); the pair is stored through log u and log w.
///
/// The pair is returned right after a w-update, so the column marginal
/// w . (xi^T u) equals q to rounding; `residual` is the row-marginal error
/// max_i |u_i (xi w)_i - p_i| of the returned pair.
struct ScalingPair {
  std::vector<double> log_u;
  std::vector<double> log_w;
  int iterations = 0;
  double residual = 0.0;
  /// max_i |u_i - u_i'| (xi w)_i over the last u-update, i.e. the change of u
  /// weighted by the kernel sum it multiplies
  double u_change = 0.0;
  bool converged = false;
  bool log_domain = false;
  KernelSpec kernel;
  double tol = 0.0;

  /// Row-marginal residual (infinity norm) after each iteration.
  std::vector<double> residual_history;
  /// The same error in the l1 norm.
  std::vector<double> l1_residual_history;
  /// False when the l1 row error ever increased beyond rounding.
  bool residual_monotone = true;
  /// Largest |u . (xi w) - p| seen immediately after a u-update, and the
  /// matching quantity for q after each w-update.
  double max_update_error_p = 0.0;
  double max_update_error_q = 0.0;

  std::vector<double> u() const;
  std::vector<double> w() const;
};

/// Sinkhorn diagonal scaling between two mass fields on the same grid,
/// starting from u = 1. Stops once the u-change drops below tol with a row
/// residual <= tol, or after max_iter u-updates.
ScalingPair sinkhorn(const MassField& p, const MassField& q, const KernelSpec& kernel,
                     const SinkhornOptions& options = {});
ScalingPair sinkhorn(const MassField& p, const MassField& q, const GibbsKernel& kernel,
                     const SinkhornOptions& options = {});

/// What derived-quantity routines do with a pair that did not converge.
enum class StalePolicy { reject, accept };

class DenseCoupling {
 public:
  DenseCoupling(std::size_t n, std::vector<double> entries);
  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  std::span<const double> entries() const { return entries_; }
  std::vector<double> row_sums() const;
  std::vector<double> col_sums() const;

 private:
  std::size_t n_;
  std::vector<double> entries_;
};

/// gamma = diag(u) exp(-c/eps) diag(w).
DenseCoupling dense_coupling(const ScalingPair& pair, const CostMatrix& cost,
                             StalePolicy policy = StalePolicy::reject);

/// W_eps = eps * (<p, log u> + <q, log w>).
double wasserstein_value(const MassField& p, const MassField& q, const ScalingPair& pair,
                         StalePolicy policy = StalePolicy::reject);

/// Per-pixel sum_j gamma_ij c_ij.
std::vector<double> transport_cost_rows(const MassField& p, const ScalingPair& pair,
                                        StalePolicy policy = StalePolicy::reject);
std::vector<double> transport_cost_rows(const MassField& p, const ScalingPair& pair,
                                        const GibbsKernel& kernel,
                                        StalePolicy policy = StalePolicy::reject);

/// Per-pixel sum_j gamma_ij * m_x(x_j - x_i) * m_y(y_j - y_i).
std::vector<double> coupling_moment(const ScalingPair& pair, const GibbsKernel& kernel,
                                    Moment mx, Moment my);

void require_converged(const ScalingPair& pair, StalePolicy policy, std::string_view what);

}  // namespace floeot
