#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "floeot/raster.hpp"

namespace floeot {

inline constexpr double kDefaultNccThreshold = 0.25;

struct NccOptions {
  int window = 50;
  /// defaults to window / 2
  std::optional<int> search_radius;
  double threshold = kDefaultNccThreshold;
  /// defaults to window (non-overlapping tiles)
  std::optional<int> stride;
};

/// One tile whose best zero-normalized cross-correlation reached the
/// threshold. Displacement is target position minus source position.
struct NccMatch {
  double center_x = 0.0;  // pixel coordinates of the tile center
  double center_y = 0.0;
  int dx = 0;
  int dy = 0;
  double correlation = 0.0;
};

/// Windowed ZNCC template matching on integer shifts. Tiles are visited in
/// row-major order of their top-left corners; shifts that would leave the
/// target image are skipped, as are tiles (or shifted target windows) with
/// zero variance. Ties keep the first shift in (dy, dx) scan order.
std::vector<NccMatch> ncc_displacements(const IntensityRaster& src, const IntensityRaster& tgt,
                                        const NccOptions& options = {});

/// CSV with header
/// window_center_x,window_center_y,dx_px,dy_px,dx_m_per_s,dy_m_per_s,correlation
void write_ncc_csv(const std::filesystem::path& path, const std::vector<NccMatch>& matches,
                   double pixel_size, double dt);
std::vector<NccMatch> read_ncc_csv(const std::filesystem::path& path);

}  // namespace floeot
