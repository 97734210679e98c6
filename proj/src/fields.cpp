#include "floeot/fields.hpp"

#include <algorithm>
#include <cmath>

#include "floeot/errors.hpp"

namespace floeot {

Mask reportable_pixels(const MassField& p) {
  const double cutoff = kLowMassFactor * p.floor_mass();
  const auto m = p.mass();
  const auto ice = p.mask();
  Mask valid(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) valid[i] = m[i] >= cutoff && ice[i];
  return valid;
}

std::vector<double> TransportSummary::physical(const GridGeometry& geometry, double dt) const {
  if (!(dt > 0.0)) throw ParameterError("dt must be positive");
  std::vector<double> out(cbar.size());
  for (std::size_t i = 0; i < cbar.size(); ++i) {
    out[i] = std::sqrt(std::max(0.0, cbar[i])) * geometry.norm_scale() / dt;
  }
  return out;
}

TransportSummary transport_distance(const MassField& p, const MassField& q,
                                    const ScalingPair& pair, StalePolicy policy) {
  return transport_distance(p, q, pair, GibbsKernel(pair.kernel, p.geometry()), policy);
}

TransportSummary transport_distance(const MassField& p, const MassField& q,
                                    const ScalingPair& pair, const GibbsKernel& kernel,
                                    StalePolicy policy) {
  TransportSummary s;
  s.w_eps = wasserstein_value(p, q, pair, policy);
  s.cbar = transport_cost_rows(p, pair, kernel, policy);
  const auto m = p.mass();
  for (std::size_t i = 0; i < m.size(); ++i) s.cbar[i] /= m[i];
  s.valid = reportable_pixels(p);
  return s;
}

BarycentricMap barycentric_map(const MassField& p, const ScalingPair& pair, StalePolicy policy) {
  return barycentric_map(p, pair, GibbsKernel(pair.kernel, p.geometry()), policy);
}

BarycentricMap barycentric_map(const MassField& p, const ScalingPair& pair,
                               const GibbsKernel& kernel, StalePolicy policy) {
  require_converged(pair, policy, "barycentric_map");
  const auto& g = p.geometry();
  if (!g.same_shape(kernel.geometry())) throw ParameterError("barycentric_map: grid mismatch");

  const std::vector<double> rows = coupling_moment(pair, kernel, Moment::zero, Moment::zero);
  const std::vector<double> mx = coupling_moment(pair, kernel, Moment::first, Moment::zero);
  const std::vector<double> my = coupling_moment(pair, kernel, Moment::zero, Moment::first);
  const auto m = p.mass();

  BarycentricMap map;
  map.target_x.resize(g.size());
  map.target_y.resize(g.size());
  for (int r = 0; r < g.height(); ++r) {
    for (int c = 0; c < g.width(); ++c) {
      const std::size_t i = g.index(c, r);
      map.target_x[i] = (g.x_center(c) * rows[i] + mx[i]) / m[i];
      map.target_y[i] = (g.y_center(r) * rows[i] + my[i]) / m[i];
    }
  }
  map.valid = reportable_pixels(p);
  return map;
}

VelocityField velocity(const BarycentricMap& map, const GridGeometry& geometry, double dt) {
  if (!(dt > 0.0)) throw ParameterError("velocity: dt must be positive");
  if (map.target_x.size() != geometry.size()) throw ParameterError("velocity: size mismatch");
  VelocityField v;
  v.dt = dt;
  v.vx.resize(geometry.size());
  v.vy.resize(geometry.size());
  v.valid = map.valid;
  const double scale = geometry.norm_scale() / dt;
  for (int r = 0; r < geometry.height(); ++r) {
    for (int c = 0; c < geometry.width(); ++c) {
      const std::size_t i = geometry.index(c, r);
      v.vx[i] = (map.target_x[i] - geometry.x_center(c)) * scale;
      v.vy[i] = (map.target_y[i] - geometry.y_center(r)) * scale;
    }
  }
  return v;
}

namespace {

// Second-order derivative of f along one axis at position k of a line of
// length n (samples `stride` apart, spacing h). Returns false when the
// stencil touches an invalid sample.
bool derivative(const double* f, const std::uint8_t* ok, std::size_t stride, int k, int n, double h,
                double& out) {
  auto at = [&](int j) { return f[static_cast<std::size_t>(j) * stride]; };
  auto good = [&](int j) { return ok[static_cast<std::size_t>(j) * stride] != 0; };
  if (k == 0) {
    if (!good(0) || !good(1) || !good(2)) return false;
    out = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
  } else if (k == n - 1) {
    if (!good(n - 1) || !good(n - 2) || !good(n - 3)) return false;
    out = (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
  } else {
    if (!good(k - 1) || !good(k + 1)) return false;
    out = (at(k + 1) - at(k - 1)) / (2.0 * h);
  }
  return true;
}

}  // namespace

StrainField strain(const VelocityField& v, const GridGeometry& geometry, double dt) {
  if (!(dt > 0.0)) throw ParameterError("strain: dt must be positive");
  if (geometry.width() < 3 || geometry.height() < 3) {
    throw ParameterError("strain needs a grid of at least 3x3");
  }
  const std::size_t n = geometry.size();
  if (v.vx.size() != n || v.vy.size() != n || v.valid.size() != n) {
    throw ParameterError("strain: size mismatch");
  }
  const int w = geometry.width(), hgt = geometry.height();
  const double h = geometry.pixel_size();

  StrainField s;
  s.exx.assign(n, 0.0);
  s.eyy.assign(n, 0.0);
  s.exy.assign(n, 0.0);
  s.principal.assign(n, 0.0);
  s.valid.assign(n, 0);
  for (int r = 0; r < hgt; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = geometry.index(c, r);
      if (!v.valid[i]) continue;
      const std::size_t row0 = geometry.index(0, r), col0 = geometry.index(c, 0);
      double dvx_dx, dvy_dx, dvx_dy, dvy_dy;
      const bool ok = derivative(v.vx.data() + row0, v.valid.data() + row0, 1, c, w, h, dvx_dx) &&
                      derivative(v.vy.data() + row0, v.valid.data() + row0, 1, c, w, h, dvy_dx) &&
                      derivative(v.vx.data() + col0, v.valid.data() + col0, w, r, hgt, h, dvx_dy) &&
                      derivative(v.vy.data() + col0, v.valid.data() + col0, w, r, hgt, h, dvy_dy);
      if (!ok) continue;
      s.exx[i] = dt * dvx_dx;
      s.eyy[i] = dt * dvy_dy;
      s.exy[i] = 0.5 * dt * (dvx_dy + dvy_dx);
      s.principal[i] = principal_strain(s.exx[i], s.eyy[i], s.exy[i]);
      s.valid[i] = 1;
    }
  }
  return s;
}

double principal_strain(double exx, double eyy, double exy) {
  const double mean = 0.5 * (exx + eyy);
  const double radius = std::hypot(0.5 * (exx - eyy), exy);
  // |mean + radius| >= |mean - radius| exactly when mean >= 0
  return mean >= 0.0 ? mean + radius : mean - radius;
}

std::vector<double> principal_strain(const StrainField& s, std::optional<double> clip) {
  if (clip && !(*clip > 0.0)) throw ParameterError("strain clip bound must be positive");
  std::vector<double> out(s.exx.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = principal_strain(s.exx[i], s.eyy[i], s.exy[i]);
    if (clip) out[i] = std::clamp(out[i], -*clip, *clip);
  }
  return out;
}

}  // namespace floeot
