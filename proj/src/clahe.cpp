#include <algorithm>
#include <cmath>

#include "floeot/errors.hpp"
#include "floeot/raster.hpp"

namespace floeot {

namespace {

constexpr int kBins = 256;

int bin_of(double v) { return std::clamp(static_cast<int>(v), 0, kBins - 1); }

// Pixel-coordinate center of tile k along an axis of length n.
double tile_center(int k, int tile, int n) {
  const int lo = k * tile;
  const int hi = std::min(lo + tile, n);
  return 0.5 * (lo + hi - 1);
}

// Lower tile index and weight of the upper tile for pixel coordinate x.
std::pair<int, double> interp_along(int x, int tile, int n, int tiles) {
  if (tiles == 1 || x <= tile_center(0, tile, n)) return {0, 0.0};
  if (x >= tile_center(tiles - 1, tile, n)) return {tiles - 1, 0.0};
  int k = std::min(x / tile, tiles - 1);
  if (x < tile_center(k, tile, n)) --k;
  const double c0 = tile_center(k, tile, n);
  const double c1 = tile_center(k + 1, tile, n);
  return {k, (x - c0) / (c1 - c0)};
}

}  // namespace

ContrastTables contrast_tables(const IntensityRaster& raster, int tile, double clip_limit) {
  const auto& g = raster.geometry();
  if (tile < 2 || tile > std::min(g.width(), g.height())) {
    throw ParameterError("equalization tile must lie in [2, min(width, height)]");
  }
  if (!(clip_limit > 0.0)) throw ParameterError("clip limit must be positive");

  ContrastTables t;
  t.tile = tile;
  t.tiles_x = (g.width() + tile - 1) / tile;
  t.tiles_y = (g.height() + tile - 1) / tile;
  t.lut.reserve(static_cast<std::size_t>(t.tiles_x) * t.tiles_y);

  for (int ty = 0; ty < t.tiles_y; ++ty) {
    for (int tx = 0; tx < t.tiles_x; ++tx) {
      const int x0 = tx * tile, x1 = std::min(x0 + tile, g.width());
      const int y0 = ty * tile, y1 = std::min(y0 + tile, g.height());
      std::vector<double> hist(kBins, 0.0);
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) hist[bin_of(raster.at(x, y))] += 1.0;
      const double count = static_cast<double>((x1 - x0) * (y1 - y0));

      const double clip = clip_limit * count / kBins;
      double excess = 0.0;
      for (double& h : hist) {
        if (h > clip) {
          excess += h - clip;
          h = clip;
        }
      }
      const double share = excess / kBins;

      std::vector<double> lut(kBins);
      double cdf = 0.0;
      for (int b = 0; b < kBins; ++b) {
        cdf += hist[b] + share;
        lut[b] = std::min(255.0, 255.0 * cdf / count);
      }
      t.lut.push_back(std::move(lut));
    }
  }
  return t;
}

IntensityRaster equalize_contrast(const IntensityRaster& raster, int tile, double clip_limit) {
  const ContrastTables t = contrast_tables(raster, tile, clip_limit);
  const auto& g = raster.geometry();
  std::vector<double> out(g.size());

  for (int y = 0; y < g.height(); ++y) {
    const auto [ty, wy] = interp_along(y, tile, g.height(), t.tiles_y);
    const int ty1 = std::min(ty + 1, t.tiles_y - 1);
    for (int x = 0; x < g.width(); ++x) {
      const auto [tx, wx] = interp_along(x, tile, g.width(), t.tiles_x);
      const int tx1 = std::min(tx + 1, t.tiles_x - 1);
      const int b = bin_of(raster.at(x, y));
      const auto lut = [&](int i, int j) { return t.lut[static_cast<std::size_t>(j) * t.tiles_x + i][b]; };
      const double top = (1.0 - wx) * lut(tx, ty) + wx * lut(tx1, ty);
      const double bottom = (1.0 - wx) * lut(tx, ty1) + wx * lut(tx1, ty1);
      out[g.index(x, y)] = std::clamp((1.0 - wy) * top + wy * bottom, 0.0, 255.0);
    }
  }
  return IntensityRaster(g, std::move(out), raster.timestamp());
}

}  // namespace floeot
