#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "floeot/otcore.hpp"
#include "floeot/raster.hpp"

namespace testsupport {

inline floeot::IntensityRaster random_raster(int w, int h, unsigned seed, double lo = 1.0,
                                             double hi = 255.0, double pixel_size = 250.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(w) * h);
  for (double& x : v) x = d(rng);
  return floeot::IntensityRaster(floeot::GridGeometry(w, h, pixel_size), std::move(v));
}

inline floeot::MassField random_mass(int w, int h, unsigned seed) {
  return floeot::normalize_to_mass(random_raster(w, h, seed));
}

inline floeot::MassField mass_from(int w, int h, std::vector<double> values,
                                   double floor = floeot::kDefaultFloor,
                                   double pixel_size = 250.0) {
  return floeot::normalize_to_mass(
      floeot::IntensityRaster(floeot::GridGeometry(w, h, pixel_size), std::move(values)), floor);
}

inline double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

/// max|a - b| / max|b|
inline double rel_inf(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  const double s = max_abs(b);
  return s > 0.0 ? d / s : d;
}

/// Squared distance between normalized pixel centers, computed from scratch.
inline double cost_between(const floeot::GridGeometry& g, std::size_t i, std::size_t j) {
  const double L = std::max(g.width(), g.height());
  const double xi = (static_cast<double>(i % g.width()) + 0.5) / L;
  const double yi = (static_cast<double>(i / g.width()) + 0.5) / L;
  const double xj = (static_cast<double>(j % g.width()) + 0.5) / L;
  const double yj = (static_cast<double>(j / g.width()) + 0.5) / L;
  return (xi - xj) * (xi - xj) + (yi - yj) * (yi - yj);
}

/// gamma_ij = exp(log u_i - c_ij / eps + log w_j), evaluated entry by entry.
inline std::vector<double> explicit_coupling(const floeot::ScalingPair& pair,
                                             const floeot::GridGeometry& g) {
  const std::size_t n = g.size();
  std::vector<double> gamma(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      gamma[i * n + j] =
          std::exp(pair.log_u[i] - cost_between(g, i, j) / pair.kernel.epsilon + pair.log_w[j]);
  return gamma;
}

/// sum c gamma - eps H(gamma), H = -sum gamma log gamma.
inline double primal_objective(const floeot::ScalingPair& pair, const floeot::GridGeometry& g) {
  const std::size_t n = g.size();
  const auto gamma = explicit_coupling(pair, g);
  double cost = 0.0, neg_entropy = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double x = gamma[i * n + j];
      cost += cost_between(g, i, j) * x;
      if (x > 0.0) neg_entropy += x * std::log(x);
    }
  return cost + pair.kernel.epsilon * neg_entropy;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("floeot_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
