#include "floeot/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "floeot/errors.hpp"

namespace floeot {

namespace {

struct Point {
  double x, y;
};

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew's monotone chain; counter-clockwise hull without repeated endpoint.
std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Uniform draw in [0, 1) from the raw engine output so the shape does not
// depend on the standard library's distribution implementation.
double unit(std::mt19937& rng) { return static_cast<double>(rng()) / 4294967296.0; }

class Floe {
 public:
  explicit Floe(const FloeSpec& spec) : spec_(spec) {
    if (spec.shape != FloeShape::polygon) return;
    std::mt19937 rng(spec.seed);
    const int n = std::max(3, spec.vertices);
    std::vector<Point> pts;
    for (int k = 0; k < n; ++k) {
      const double angle = 2.0 * std::numbers::pi * (k + 0.6 * (unit(rng) - 0.5)) / n;
      const double r = spec.radius * (0.8 + 0.35 * unit(rng));
      pts.push_back({spec.center_x + r * std::cos(angle), spec.center_y + r * std::sin(angle)});
    }
    hull_ = convex_hull(std::move(pts));
  }

  bool contains(double x, double y) const {
    switch (spec_.shape) {
      case FloeShape::disc: {
        const double dx = x - spec_.center_x, dy = y - spec_.center_y;
        return dx * dx + dy * dy <= spec_.radius * spec_.radius;
      }
      case FloeShape::block:
        return std::abs(x - spec_.center_x) < spec_.radius &&
               std::abs(y - spec_.center_y) < spec_.radius;
      case FloeShape::polygon:
        break;
    }
    const Point p{x, y};
    for (std::size_t i = 0; i < hull_.size(); ++i) {
      if (cross(hull_[i], hull_[(i + 1) % hull_.size()], p) < 0) return false;
    }
    return true;
  }

 private:
  FloeSpec spec_;
  std::vector<Point> hull_;
};

// A piece of a floe: pixels of the source floe on one side of axis-aligned
// cuts (pixel-edge coordinates), moved by a displacement proportional to t.
struct Fragment {
  double x_lo = -1e300, x_hi = 1e300, y_lo = -1e300, y_hi = 1e300;
  Point shift{0.0, 0.0};
  bool holds(double x, double y) const { return x >= x_lo && x < x_hi && y >= y_lo && y < y_hi; }
};

std::vector<Point> floe_pixels(const Floe& floe, int size) {
  std::vector<Point> pix;
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c)
      if (floe.contains(c + 0.5, r + 0.5)) pix.push_back({c + 0.5, r + 0.5});
  return pix;
}

// Pixel-edge coordinate along one axis leaving `fraction` of the pixels below it.
double area_cut(const std::vector<Point>& pix, double fraction, bool along_x, int size) {
  std::vector<int> count(size, 0);
  for (const auto& p : pix) ++count[static_cast<int>(along_x ? p.x : p.y)];
  const double target = fraction * static_cast<double>(pix.size());
  int best = 0;
  double best_err = 1e300;
  int acc = 0;
  for (int b = 0; b <= size; ++b) {
    if (std::abs(acc - target) < best_err) {
      best_err = std::abs(acc - target);
      best = b;
    }
    if (b < size) acc += count[b];
  }
  return best;
}

Point centroid(const std::vector<Point>& pix, const Fragment& f) {
  double sx = 0, sy = 0, n = 0;
  for (const auto& p : pix) {
    if (!f.holds(p.x, p.y)) continue;
    sx += p.x;
    sy += p.y;
    n += 1;
  }
  return n > 0 ? Point{sx / n, sy / n} : Point{0, 0};
}

std::vector<Fragment> fragments(const Scenario& s, const Floe& floe) {
  const MotionSpec& m = s.motion;
  switch (s.kind) {
    case ScenarioKind::split_equal:
    case ScenarioKind::split_unequal: {
      const double cut = area_cut(floe_pixels(floe, s.size), m.split_fraction, true, s.size);
      Fragment left, right;
      left.x_hi = cut;
      right.x_lo = cut;
      left.shift = {m.dx - 0.5 * m.separation, m.dy};
      right.shift = {m.dx + 0.5 * m.separation, m.dy};
      return {left, right};
    }
    case ScenarioKind::split_quad: {
      const auto pix = floe_pixels(floe, s.size);
      const double xc = area_cut(pix, 0.5, true, s.size);
      const double yc = area_cut(pix, 0.5, false, s.size);
      std::vector<Fragment> out(4);
      out[0].x_hi = xc, out[0].y_hi = yc;
      out[1].x_lo = xc, out[1].y_hi = yc;
      out[2].x_hi = xc, out[2].y_lo = yc;
      out[3].x_lo = xc, out[3].y_lo = yc;
      const Point whole = centroid(pix, Fragment{});
      // Area-weighted offsets from the centroid sum to zero, so the mean
      // floe position is unchanged.
      for (auto& f : out) {
        const Point c = centroid(pix, f);
        f.shift = {m.spread * (c.x - whole.x), m.spread * (c.y - whole.y)};
      }
      return out;
    }
    default: {
      Fragment all;
      all.shift = {m.dx, m.dy};
      return {all};
    }
  }
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::translate:
      return "translate";
    case ScenarioKind::split_equal:
      return "split_equal";
    case ScenarioKind::split_unequal:
      return "split_unequal";
    case ScenarioKind::split_quad:
      return "split_quad";
    case ScenarioKind::multi_floe:
      return "multi_floe";
    case ScenarioKind::rotate:
      return "rotate";
  }
  return "?";
}

ScenarioKind scenario_kind_from_string(std::string_view name) {
  for (auto k : {ScenarioKind::translate, ScenarioKind::split_equal, ScenarioKind::split_unequal,
                 ScenarioKind::split_quad, ScenarioKind::multi_floe, ScenarioKind::rotate}) {
    if (to_string(k) == name) return k;
  }
  throw ParameterError("unknown scenario '" + std::string(name) + "'");
}

Scenario Scenario::make(ScenarioKind kind, int size, FloeShape shape) {
  if (size < 8) throw ParameterError("scenario grid must be at least 8x8");
  const double L = size;
  Scenario s;
  s.kind = kind;
  s.size = size;
  s.floe.shape = shape;
  s.floe.center_x = 0.5 * L;
  s.floe.center_y = 0.5 * L;
  s.floe.radius = 0.15 * L;
  switch (kind) {
    case ScenarioKind::translate:
      s.floe.center_x = 0.42 * L;
      s.motion.dx = 20.0 * L / 128.0;
      break;
    case ScenarioKind::split_equal:
    case ScenarioKind::split_unequal:
      s.floe.center_x = 0.44 * L;
      s.motion.dx = 20.0 * L / 128.0;
      s.motion.separation = 20.0 * L / 128.0;
      s.motion.split_fraction = kind == ScenarioKind::split_equal ? 0.5 : 0.2;
      break;
    case ScenarioKind::split_quad:
      s.motion.spread = 0.8;
      break;
    case ScenarioKind::multi_floe:
      s.floe.center_x = 0.3125 * L;
      s.floe.center_y = 0.34375 * L;
      s.floe.radius = 0.094 * L;
      s.second_floe = s.floe;
      s.second_floe.seed = 11;
      s.second_floe.center_x = 0.656 * L;
      s.second_floe.center_y = 0.656 * L;
      s.second_floe.radius = 0.109 * L;
      s.motion.dx = 20.0 * L / 128.0;
      s.motion.second_dx = -10.0 * L / 128.0;
      s.motion.second_dy = 10.0 * L / 128.0;
      break;
    case ScenarioKind::rotate:
      s.motion.angle_deg = 60.0;
      break;
  }
  return s;
}

IntensityRaster render(const Scenario& s, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ParameterError("pseudo-time t must lie in [0, 1]");
  const int n = s.size;
  const GridGeometry geom(n, n, s.pixel_size);
  std::vector<double> v(geom.size(), 0.0);
  const Floe floe(s.floe);

  if (s.kind == ScenarioKind::rotate) {
    const IntensityRaster src = render(Scenario{ScenarioKind::translate, n, s.floe, {}, {}, s.pixel_size, s.duration}, 0.0);
    const double theta = s.motion.angle_deg * std::numbers::pi / 180.0 * t;
    const double c = std::cos(theta), sn = std::sin(theta);
    const double cx = s.floe.center_x, cy = s.floe.center_y;
    for (int r = 0; r < n; ++r) {
      for (int col = 0; col < n; ++col) {
        const double px = col + 0.5 - cx, py = r + 0.5 - cy;
        // rotate back by -theta
        const double qx = c * px + sn * py + cx;
        const double qy = -sn * px + c * py + cy;
        const int sc = static_cast<int>(std::floor(qx)), sr = static_cast<int>(std::floor(qy));
        if (sc >= 0 && sc < n && sr >= 0 && sr < n) v[geom.index(col, r)] = src.at(sc, sr);
      }
    }
    return IntensityRaster(geom, std::move(v), t * s.duration);
  }

  const auto frags = fragments(s, floe);
  std::optional<Floe> second;
  if (s.kind == ScenarioKind::multi_floe) second.emplace(s.second_floe);

  for (int r = 0; r < n; ++r) {
    for (int col = 0; col < n; ++col) {
      const double px = col + 0.5, py = r + 0.5;
      for (const auto& f : frags) {
        const double qx = px - t * f.shift.x, qy = py - t * f.shift.y;
        if (f.holds(qx, qy) && floe.contains(qx, qy)) {
          v[geom.index(col, r)] = s.floe.intensity;
          break;
        }
      }
      if (second && second->contains(px - t * s.motion.second_dx, py - t * s.motion.second_dy)) {
        v[geom.index(col, r)] = s.second_floe.intensity;
      }
    }
  }
  return IntensityRaster(geom, std::move(v), t * s.duration);
}

std::vector<SweepRow> sweep(const Scenario& scenario, std::span<const double> eps_list, int t_steps,
                            const SweepOptions& options) {
  if (t_steps < 2) throw ParameterError("sweep needs at least two t samples");
  for (double e : eps_list) {
    if (!(e > 0.0)) throw ParameterError("sweep epsilon values must be positive");
  }
  const MassField p = normalize_to_mass(render(scenario, 0.0), options.floor);
  std::vector<MassField> targets;
  std::vector<double> ts;
  for (int k = 0; k < t_steps; ++k) {
    const double t = static_cast<double>(k) / (t_steps - 1);
    ts.push_back(t);
    targets.push_back(normalize_to_mass(render(scenario, t), options.floor));
  }

  std::vector<SweepRow> rows;
  for (double eps : eps_list) {
    const KernelSpec spec = options.mode
                                ? (*options.mode == KernelMode::dense
                                       ? KernelSpec::dense(eps)
                                       : KernelSpec::convolutional(eps, p.geometry()))
                                : KernelSpec::automatic(eps, p.geometry());
    const GibbsKernel kernel(spec, p.geometry());
    double w0 = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
      ScalingPair pair;
      try {
        pair = sinkhorn(p, targets[k], kernel, options.solver);
      } catch (const StabilizationError& e) {
        std::ostringstream msg;
        msg << e.what() << " [sweep eps=" << eps << ", t=" << ts[k] << "]";
        throw StabilizationError(msg.str());
      }
      const double w = wasserstein_value(p, targets[k], pair, StalePolicy::accept);
      if (k == 0) w0 = w;
      rows.push_back({eps, ts[k], w - w0, pair.iterations, pair.converged});
    }
  }
  return rows;
}

}  // namespace floeot
