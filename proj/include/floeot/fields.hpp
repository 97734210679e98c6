#pragma once

#include <optional>
#include <vector>

#include "floeot/otcore.hpp"
#include "floeot/raster.hpp"

namespace floeot {

/// Pixels whose source mass is below this multiple of the floor contribution
/// carry no derived value.
inline constexpr double kLowMassFactor = 10.0;

/// Per-pixel conditional transport cost and the global W_eps.
struct TransportSummary {
  double w_eps = 0.0;
  /// sum_j gamma_ij c_ij / p_i, squared normalized units
  std::vector<double> cbar;
  Mask valid;

  /// sqrt(cbar) * norm_scale / dt, meters per second.
  std::vector<double> physical(const GridGeometry& geometry, double dt) const;
};

/// Where each source pixel's mass lands on average, in normalized coordinates.
/// Targets are stored for every pixel; `valid` marks the pixels with enough
/// source mass (and inside the ice mask) to be reported.
struct BarycentricMap {
  std::vector<double> target_x;
  std::vector<double> target_y;
  Mask valid;
};

struct VelocityField {
  std::vector<double> vx;  // m/s, positive to the right
  std::vector<double> vy;  // m/s, positive down the image
  Mask valid;
  double dt = 0.0;
};

/// Incremental strain (dimensionless), symmetric 2x2 per pixel.
struct StrainField {
  std::vector<double> exx;
  std::vector<double> eyy;
  std::vector<double> exy;
  std::vector<double> principal;
  Mask valid;
};

/// Mask of pixels with p_i >= kLowMassFactor * floor_mass and inside p's mask.
Mask reportable_pixels(const MassField& p);

TransportSummary transport_distance(const MassField& p, const MassField& q,
                                    const ScalingPair& pair, const GibbsKernel& kernel,
                                    StalePolicy policy = StalePolicy::reject);
TransportSummary transport_distance(const MassField& p, const MassField& q,
                                    const ScalingPair& pair,
                                    StalePolicy policy = StalePolicy::reject);

/// target = x + sum_j gamma_ij (x_j - x_i) / p_i + x (rowsum_i / p_i - 1), i.e.
/// (u . xi(w . x)) / p written with centered moments.
BarycentricMap barycentric_map(const MassField& p, const ScalingPair& pair,
                               const GibbsKernel& kernel,
                               StalePolicy policy = StalePolicy::reject);
BarycentricMap barycentric_map(const MassField& p, const ScalingPair& pair,
                               StalePolicy policy = StalePolicy::reject);

/// Displacement from the pixel center to its barycentric target, scaled to m/s.
VelocityField velocity(const BarycentricMap& map, const GridGeometry& geometry, double dt);

/// dt/2 (grad v + grad v^T) with second-order differences (central inside,
/// one-sided at the border). Any stencil that touches an invalid pixel makes
/// the result invalid. Principal strain is filled in unclipped.
StrainField strain(const VelocityField& v, const GridGeometry& geometry, double dt);

/// Eigenvalue of larger magnitude, with its sign; ties go to the positive one.
double principal_strain(double exx, double eyy, double exy);

/// Per-pixel principal strain, optionally clipped to [-clip, clip].
std::vector<double> principal_strain(const StrainField& s, std::optional<double> clip = std::nullopt);

}  // namespace floeot
