#include "floeot/ncc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "floeot/errors.hpp"

namespace floeot {

namespace {

struct WindowStats {
  double mean = 0.0;
  double ss = 0.0;  // sum of squared deviations
};

WindowStats stats(const IntensityRaster& r, int x0, int y0, int size) {
  double sum = 0.0;
  for (int y = y0; y < y0 + size; ++y)
    for (int x = x0; x < x0 + size; ++x) sum += r.at(x, y);
  WindowStats s;
  s.mean = sum / (static_cast<double>(size) * size);
  for (int y = y0; y < y0 + size; ++y)
    for (int x = x0; x < x0 + size; ++x) {
      const double d = r.at(x, y) - s.mean;
      s.ss += d * d;
    }
  return s;
}

bool flat(const WindowStats& s) { return !(s.ss > 1e-20 * (s.mean * s.mean + 1.0)); }

}  // namespace

std::vector<NccMatch> ncc_displacements(const IntensityRaster& src, const IntensityRaster& tgt,
                                        const NccOptions& options) {
  const auto& g = src.geometry();
  if (!g.same_shape(tgt.geometry())) throw ParameterError("ncc: source and target grids differ");
  const int win = options.window;
  const int radius = options.search_radius.value_or(win / 2);
  const int stride = options.stride.value_or(win);
  if (win < 8) throw ParameterError("ncc window must be at least 8 pixels");
  if (win > g.width() || win > g.height()) throw ParameterError("ncc window exceeds the image");
  if (radius < 1) throw ParameterError("ncc search radius must be >= 1");
  if (stride < 1) throw ParameterError("ncc stride must be >= 1");

  std::vector<NccMatch> out;
  for (int y0 = 0; y0 + win <= g.height(); y0 += stride) {
    for (int x0 = 0; x0 + win <= g.width(); x0 += stride) {
      const WindowStats a = stats(src, x0, y0, win);
      if (flat(a)) continue;

      NccMatch best;
      best.correlation = -2.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const int tx = x0 + dx, ty = y0 + dy;
          if (tx < 0 || ty < 0 || tx + win > g.width() || ty + win > g.height()) continue;
          const WindowStats b = stats(tgt, tx, ty, win);
          if (flat(b)) continue;
          double num = 0.0;
          for (int y = 0; y < win; ++y)
            for (int x = 0; x < win; ++x)
              num += (src.at(x0 + x, y0 + y) - a.mean) * (tgt.at(tx + x, ty + y) - b.mean);
          const double rho = std::clamp(num / std::sqrt(a.ss * b.ss), -1.0, 1.0);
          if (rho > best.correlation) {
            best.correlation = rho;
            best.dx = dx;
            best.dy = dy;
          }
        }
      }
      if (best.correlation >= options.threshold) {
        best.center_x = x0 + 0.5 * (win - 1);
        best.center_y = y0 + 0.5 * (win - 1);
        out.push_back(best);
      }
    }
  }
  return out;
}

void write_ncc_csv(const std::filesystem::path& path, const std::vector<NccMatch>& matches,
                   double pixel_size, double dt) {
  if (!(dt > 0.0)) throw ParameterError("ncc: dt must be positive");
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "window_center_x,window_center_y,dx_px,dy_px,dx_m_per_s,dy_m_per_s,correlation\n";
  out << std::setprecision(17);
  for (const auto& m : matches) {
    out << m.center_x << ',' << m.center_y << ',' << m.dx << ',' << m.dy << ','
        << m.dx * pixel_size / dt << ',' << m.dy * pixel_size / dt << ',' << m.correlation << '\n';
  }
}

std::vector<NccMatch> read_ncc_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<NccMatch> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> f;
    while (std::getline(ss, cell, ',')) {
      try {
        f.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw FormatError("ncc csv: bad number '" + cell + "'");
      }
    }
    if (f.size() != 7) throw FormatError("ncc csv: expected 7 columns");
    out.push_back({f[0], f[1], static_cast<int>(f[2]), static_cast<int>(f[3]), f[6]});
  }
  return out;
}

}  // namespace floeot
