#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "floeot/otcore.hpp"
#include "floeot/raster.hpp"

namespace floeot {

enum class ScenarioKind { translate, split_equal, split_unequal, split_quad, multi_floe, rotate };

std::string_view to_string(ScenarioKind kind);
/// Throws ParameterError for unknown names.
ScenarioKind scenario_kind_from_string(std::string_view name);

enum class FloeShape { polygon, disc, block };

/// Geometry of one synthetic floe, in pixel units on the scenario grid.
struct FloeSpec {
  FloeShape shape = FloeShape::polygon;
  double center_x = 0.0;
  double center_y = 0.0;
  /// polygon/disc radius, half side length for blocks
  double radius = 0.0;
  std::uint32_t seed = 7;
  int vertices = 9;
  double intensity = 255.0;
};

/// Per-scenario motion parameters. Displacements are in pixels at t = 1.
struct MotionSpec {
  double dx = 0.0;
  double dy = 0.0;
  /// split kinds: fragments drift apart by this many pixels along the cut normal
  double separation = 0.0;
  /// split kinds: area fraction of the first fragment
  double split_fraction = 0.5;
  /// split_quad: fragments move by this multiple of their centroid offset
  double spread = 0.0;
  double angle_deg = 0.0;
  /// multi_floe: displacement of the second floe
  double second_dx = 0.0;
  double second_dy = 0.0;
};

struct Scenario {
  ScenarioKind kind = ScenarioKind::translate;
  int size = 128;
  FloeSpec floe;
  FloeSpec second_floe;  // multi_floe only
  MotionSpec motion;
  double pixel_size = 250.0;
  /// seconds represented by t = 1
  double duration = 86400.0;

  /// Default parameters for each kind, scaled to a size x size grid.
  static Scenario make(ScenarioKind kind, int size = 128, FloeShape shape = FloeShape::polygon);
};

/// Binary frame (floe 255, background 0) of the scenario at pseudo-time t.
/// Pixels are point-sampled at their centers; rotation maps each pixel back
/// into the t = 0 frame and takes the nearest source pixel.
IntensityRaster render(const Scenario& scenario, double t);

struct SweepOptions {
  SinkhornOptions solver;
  /// nullopt picks dense or convolutional by grid size
  std::optional<KernelMode> mode;
  double floor = kDefaultFloor;
};

struct SweepRow {
  double epsilon = 0.0;
  double t = 0.0;
  double w_minus_w0 = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// W_eps(render(0), render(t)) - W_eps(render(0), render(0)) on `t_steps`
/// uniform samples of [0, 1], for each epsilon. Rows are ordered by (eps, t).
std::vector<SweepRow> sweep(const Scenario& scenario, std::span<const double> eps_list,
                            int t_steps, const SweepOptions& options = {});

}  // namespace floeot
