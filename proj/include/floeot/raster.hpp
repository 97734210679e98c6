#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace floeot {

/// Per-pixel boolean layer (1 = set). Stored as bytes so it can be viewed
/// through std::span.
using Mask = std::vector<std::uint8_t>;

/// Sentinel written to f32 rasters for pixels that carry no value.
inline constexpr float kNoData = -3.4e38F;

/// Pixel grid shared by every field in a solve.
///
/// Pixel (col, row) has its center at ((col + 0.5) / L, (row + 0.5) / L) in
/// normalized coordinates, where L = max(width, height). The longer axis thus
/// maps onto [0, 1] and one normalized unit corresponds to norm_scale() meters.
/// Row index grows downwards, so positive y points down the image.
class GridGeometry {
 public:
  GridGeometry(int width, int height, double pixel_size);

  int width() const { return width_; }
  int height() const { return height_; }
  double pixel_size() const { return pixel_size_; }
  std::size_t size() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  int long_axis() const { return width_ > height_ ? width_ : height_; }
  double norm_scale() const { return long_axis() * pixel_size_; }
  /// Distance between neighbouring pixel centers in normalized units.
  double pitch() const { return 1.0 / long_axis(); }
  double x_center(int col) const { return (col + 0.5) * pitch(); }
  double y_center(int row) const { return (row + 0.5) * pitch(); }
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  bool same_shape(const GridGeometry& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }
  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;

 private:
  int width_;
  int height_;
  double pixel_size_;
};

/// Raw single-band image. Values are intensities, row-major.
class IntensityRaster {
 public:
  IntensityRaster(GridGeometry geometry, std::vector<double> values, double timestamp = 0.0);

  const GridGeometry& geometry() const { return geometry_; }
  std::span<const double> values() const { return values_; }
  double timestamp() const { return timestamp_; }
  double at(int col, int row) const { return values_[geometry_.index(col, row)]; }

 private:
  GridGeometry geometry_;
  std::vector<double> values_;
  double timestamp_;
};

/// Normalized, strictly positive mass on the grid.
class MassField {
 public:
  MassField(GridGeometry geometry, std::vector<double> mass, Mask mask, double floor);

  const GridGeometry& geometry() const { return geometry_; }
  std::span<const double> mass() const { return mass_; }
  std::span<const std::uint8_t> mask() const { return mask_; }
  double floor() const { return floor_; }
  /// Mass that the background floor alone contributes to every pixel.
  double floor_mass() const;

 private:
  GridGeometry geometry_;
  std::vector<double> mass_;
  Mask mask_;
  double floor_;
};

struct RasterMetadata {
  double pixel_size_m = 0.0;
  double timestamp_s = 0.0;
};

// ---------------------------------------------------------------------------
// I/O

/// Reads `{"pixel_size_m": .., "timestamp_s": ..}`.
RasterMetadata load_metadata(const std::filesystem::path& meta_path);
void save_metadata(const std::filesystem::path& meta_path, const RasterMetadata& meta);

/// Loads an 8-bit binary PGM (P5, maxval 255) plus its JSON sidecar.
IntensityRaster load_raster(const std::filesystem::path& path,
                            const std::filesystem::path& meta_path);

/// Writes values rounded and clamped to [0, 255] as P5 together with the
/// metadata sidecar.
void save_raster(const std::filesystem::path& path, const std::filesystem::path& meta_path,
                 const IntensityRaster& raster);

/// Sidecar path convention used by the CLI: `floe.pgm` -> `floe.json`.
std::filesystem::path default_meta_path(const std::filesystem::path& image_path);

/// Writes a little-endian float32 raster and `<path>.json` describing it.
/// Pixels with valid[i] == 0 (or non-finite values) are written as kNoData.
void write_f32(const std::filesystem::path& path, const GridGeometry& geometry,
               std::span<const double> values, std::span<const std::uint8_t> valid = {});

struct F32Raster {
  int width = 0;
  int height = 0;
  std::vector<float> values;
};
F32Raster read_f32(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Preprocessing

inline constexpr double kDefaultIceThreshold = 120.0;
inline constexpr double kDefaultFloor = 1e-10;

/// mask[i] = values[i] > threshold.
Mask apply_ice_mask(const IntensityRaster& raster, double threshold = kDefaultIceThreshold);

/// Contrast-limited adaptive histogram equalization with square tiles of
/// `tile` pixels. Tiles that do not fit at the right/bottom edges are
/// shortened. Output intensities lie in [0, 255].
IntensityRaster equalize_contrast(const IntensityRaster& raster, int tile = 8,
                                  double clip_limit = 2.0);

/// The clipped-histogram lookup tables behind equalize_contrast, one 256-entry
/// table per tile in row-major tile order.
struct ContrastTables {
  int tiles_x = 0;
  int tiles_y = 0;
  int tile = 0;
  std::vector<std::vector<double>> lut;
};
ContrastTables contrast_tables(const IntensityRaster& raster, int tile, double clip_limit);

/// mass[i] = (v[i] + floor * S) / sum_j (v[j] + floor * S) with S = sum_j v[j].
/// Without a mask every pixel is marked as ice.
MassField normalize_to_mass(const IntensityRaster& raster, double floor = kDefaultFloor,
                            std::optional<Mask> mask = std::nullopt);

}  // namespace floeot
