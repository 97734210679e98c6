#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "floeot/ncc.hpp"
#include "floeot/otcore.hpp"
#include "floeot/raster.hpp"
#include "floeot/synth.hpp"

namespace floeot::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNotConverged = 2;
inline constexpr int kExitStabilization = 3;

struct RunConfig {
  double eps = 1e-3;
  double tol = 1e-6;
  int max_iter = 1000;
  std::string mode = "auto";  // auto | dense | conv
  bool log_domain = false;
  double mask_threshold = kDefaultIceThreshold;
  double floor = kDefaultFloor;
  bool equalize = false;
  int tile = 8;
  double clip = 2.0;
  std::filesystem::path output = "out";
  /// seconds; taken from the sidecar timestamps when absent
  std::optional<double> dt;
  std::optional<double> clip_strain;
  /// write vectors.csv with every k-th pixel along each axis (0 = skip)
  int thin = 0;
};

/// Kernel for `mode` on this grid. Throws ParameterError on unknown modes.
KernelSpec kernel_for(const RunConfig& config, const GridGeometry& geometry);

/// Ice mask on raw intensities, optional contrast equalization of the ice
/// pixels, then floor and normalization.
MassField prepare_mass(const IntensityRaster& raster, const RunConfig& config);

/// Sidecar next to an image unless given explicitly.
std::filesystem::path meta_or_default(const std::filesystem::path& image,
                                      const std::optional<std::filesystem::path>& meta);

struct SolveInputs {
  std::filesystem::path source;
  std::filesystem::path target;
  std::optional<std::filesystem::path> source_meta;
  std::optional<std::filesystem::path> target_meta;
};

/// Writes summary.json and the field rasters into config.output.
int cmd_solve(const SolveInputs& in, const RunConfig& config, std::ostream& log);

struct NccConfig {
  NccOptions options;
  std::optional<double> dt;
  std::filesystem::path output = "ncc.csv";
};
int cmd_ncc(const SolveInputs& in, const NccConfig& config, std::ostream& log);

struct SynthConfig {
  std::string kind = "translate";
  int size = 128;
  std::string shape = "polygon";  // polygon | disc | block
  double t = 1.0;
  /// directory receiving source.pgm/.json and target.pgm/.json
  std::filesystem::path output = "synth";
};
int cmd_synth(const SynthConfig& config, std::ostream& log);

struct SweepConfig {
  std::string kind = "translate";
  int size = 128;
  std::string shape = "polygon";
  std::vector<double> eps = {1e-3, 1e-2, 1e-1, 1.0};
  int t_steps = 11;
  double tol = 1e-6;
  int max_iter = 1000;
  std::string mode = "auto";
  double floor = kDefaultFloor;
  std::filesystem::path output = "sweep.csv";
};
int cmd_sweep(const SweepConfig& config, std::ostream& log);

/// Exact transport value between the normalized images; writes {value, iterations}.
int cmd_oracle(const SolveInputs& in, const RunConfig& config, std::ostream& log);

struct CompareConfig {
  std::filesystem::path bundle;    // directory written by cmd_solve
  std::filesystem::path features;  // CSV: src_x,src_y,tgt_x,tgt_y in pixels
  std::optional<std::filesystem::path> ncc;
  std::filesystem::path output = "compare.json";
};
int cmd_compare_features(const CompareConfig& config, std::ostream& log);

}  // namespace floeot::cli
