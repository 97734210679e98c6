#include "floeot/raster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>

#include "floeot/errors.hpp"
#include "json.hpp"

namespace floeot {

namespace fs = std::filesystem;
using nlohmann::json;

GridGeometry::GridGeometry(int width, int height, double pixel_size)
    : width_(width), height_(height), pixel_size_(pixel_size) {
  // A single row or column is allowed; the two-pixel problem is a useful
  // degenerate case for the solver.
  if (width < 1 || height < 1 || static_cast<long long>(width) * height < 2) {
    throw ParameterError("grid must hold at least two pixels, got " + std::to_string(width) +
                         "x" + std::to_string(height));
  }
  if (!(pixel_size > 0.0) || !std::isfinite(pixel_size)) {
    throw ParameterError("pixel size must be positive");
  }
}

IntensityRaster::IntensityRaster(GridGeometry geometry, std::vector<double> values,
                                 double timestamp)
    : geometry_(geometry), values_(std::move(values)), timestamp_(timestamp) {
  if (values_.size() != geometry_.size()) {
    throw ParameterError("raster holds " + std::to_string(values_.size()) + " values for a " +
                         std::to_string(geometry_.size()) + "-pixel grid");
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) throw ParameterError("raster values must be finite and >= 0");
  }
}

MassField::MassField(GridGeometry geometry, std::vector<double> mass, Mask mask, double floor)
    : geometry_(geometry), mass_(std::move(mass)), mask_(std::move(mask)), floor_(floor) {
  if (mass_.size() != geometry_.size() || mask_.size() != geometry_.size()) {
    throw ParameterError("mass field size does not match its geometry");
  }
  if (!(floor_ > 0.0)) throw ParameterError("mass floor must be positive");
  for (double m : mass_) {
    if (!(m > 0.0) || !std::isfinite(m)) throw ParameterError("mass must be strictly positive");
  }
}

double MassField::floor_mass() const {
  return floor_ / (1.0 + static_cast<double>(geometry_.size()) * floor_);
}

// ---------------------------------------------------------------------------

RasterMetadata load_metadata(const fs::path& meta_path) {
  std::ifstream in(meta_path);
  if (!in) throw MetadataError("cannot open sidecar " + meta_path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw MetadataError("invalid sidecar " + meta_path.string() + ": " + e.what());
  }
  RasterMetadata meta;
  auto number = [&](const char* key) {
    if (!j.is_object() || !j.contains(key) || !j[key].is_number()) {
      throw MetadataError(std::string("sidecar ") + meta_path.string() + " lacks numeric '" +
                          key + "'");
    }
    return j[key].get<double>();
  };
  meta.pixel_size_m = number("pixel_size_m");
  meta.timestamp_s = number("timestamp_s");
  if (!(meta.pixel_size_m > 0.0) || !std::isfinite(meta.pixel_size_m)) {
    throw MetadataError("pixel_size_m must be positive in " + meta_path.string());
  }
  if (!std::isfinite(meta.timestamp_s)) {
    throw MetadataError("timestamp_s must be finite in " + meta_path.string());
  }
  return meta;
}

void save_metadata(const fs::path& meta_path, const RasterMetadata& meta) {
  std::ofstream out(meta_path);
  if (!out) throw MetadataError("cannot write sidecar " + meta_path.string());
  json j = {{"pixel_size_m", meta.pixel_size_m}, {"timestamp_s", meta.timestamp_s}};
  out << j.dump(2) << '\n';
}

fs::path default_meta_path(const fs::path& image_path) {
  fs::path p = image_path;
  p.replace_extension(".json");
  return p;
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string token;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(c));
  }
  return token;
}

int header_int(std::istream& in, const char* what) {
  const std::string tok = header_token(in);
  if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw FormatError(std::string("PGM header: bad ") + what + " '" + tok + "'");
  }
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    throw FormatError(std::string("PGM header: bad ") + what);
  }
}

}  // namespace

IntensityRaster load_raster(const fs::path& path, const fs::path& meta_path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  if (header_token(in) != "P5") throw FormatError(path.string() + " is not a binary PGM (P5)");
  const int width = header_int(in, "width");
  const int height = header_int(in, "height");
  const int maxval = header_int(in, "maxval");
  if (width < 1 || height < 1) throw FormatError("PGM header: empty image");
  if (maxval != 255) throw FormatError("only 8-bit PGM (maxval 255) is supported");
  // header_token consumed exactly one whitespace byte after maxval

  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<unsigned char> bytes(n);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw TruncationError(path.string() + ": header declares " + std::to_string(n) +
                          " pixels, payload has " + std::to_string(in.gcount()));
  }

  const RasterMetadata meta = load_metadata(meta_path);
  std::vector<double> values(bytes.begin(), bytes.end());
  return IntensityRaster(GridGeometry(width, height, meta.pixel_size_m), std::move(values),
                         meta.timestamp_s);
}

void save_raster(const fs::path& path, const fs::path& meta_path, const IntensityRaster& raster) {
  const auto& g = raster.geometry();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "P5\n" << g.width() << ' ' << g.height() << "\n255\n";
  std::vector<unsigned char> bytes(g.size());
  std::transform(raster.values().begin(), raster.values().end(), bytes.begin(), [](double v) {
    return static_cast<unsigned char>(std::clamp(std::lround(v), 0L, 255L));
  });
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  save_metadata(meta_path, {g.pixel_size(), raster.timestamp()});
}

void write_f32(const fs::path& path, const GridGeometry& geometry, std::span<const double> values,
               std::span<const std::uint8_t> valid) {
  if (values.size() != geometry.size() || (!valid.empty() && valid.size() != geometry.size())) {
    throw ParameterError("write_f32: field size does not match geometry");
  }
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    float f = static_cast<float>(values[i]);
    if ((!valid.empty() && !valid[i]) || !std::isfinite(values[i])) f = kNoData;
    std::uint32_t bitsv = std::bit_cast<std::uint32_t>(f);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<unsigned char>(bitsv >> (8 * b));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));

  std::ofstream side(path.string() + ".json");
  json j = {{"width", geometry.width()},
            {"height", geometry.height()},
            {"dtype", "f32le"},
            {"nodata", static_cast<double>(kNoData)}};
  side << j.dump(2) << '\n';
}

F32Raster read_f32(const fs::path& path) {
  std::ifstream side(path.string() + ".json");
  if (!side) throw MetadataError("missing sidecar for " + path.string());
  json j;
  try {
    side >> j;
  } catch (const json::exception& e) {
    throw MetadataError(std::string("invalid f32 sidecar: ") + e.what());
  }
  if (!j.contains("width") || !j.contains("height") || j.value("dtype", "") != "f32le") {
    throw MetadataError("f32 sidecar must carry width, height and dtype f32le");
  }
  F32Raster r;
  r.width = j["width"].get<int>();
  r.height = j["height"].get<int>();
  const std::size_t n = static_cast<std::size_t>(r.width) * static_cast<std::size_t>(r.height);
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> bytes(n * 4);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw TruncationError(path.string() + " is shorter than its sidecar declares");
  }
  r.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bitsv = 0;
    for (int b = 0; b < 4; ++b) bitsv |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    r.values[i] = std::bit_cast<float>(bitsv);
  }
  return r;
}

// ---------------------------------------------------------------------------

Mask apply_ice_mask(const IntensityRaster& raster, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 255.0)) {
    throw ParameterError("ice threshold must lie in [0, 255]");
  }
  Mask mask(raster.values().size());
  std::transform(raster.values().begin(), raster.values().end(), mask.begin(),
                 [threshold](double v) { return static_cast<std::uint8_t>(v > threshold); });
  return mask;
}

MassField normalize_to_mass(const IntensityRaster& raster, double floor, std::optional<Mask> mask) {
  if (!(floor > 0.0) || !std::isfinite(floor)) throw ParameterError("floor must be positive");
  const auto v = raster.values();
  // sequential sums keep results reproducible
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (!(total > 0.0)) throw DegenerateInputError("image carries no intensity (all zero)");

  const double offset = floor * total;
  std::vector<double> mass(v.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    mass[i] = v[i] + offset;
    denom += mass[i];
  }
  for (double& m : mass) m /= denom;

  Mask m = mask ? std::move(*mask) : Mask(v.size(), 1);
  return MassField(raster.geometry(), std::move(mass), std::move(m), floor);
}

}  // namespace floeot
