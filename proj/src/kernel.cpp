#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "floeot/errors.hpp"
#include "floeot/otcore.hpp"

namespace floeot {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double moment_weight(Moment m, double d) {
  switch (m) {
    case Moment::zero:
      return 1.0;
    case Moment::first:
      return d;
    case Moment::second:
      return d * d;
  }
  return 1.0;
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(what) + ": non-finite input");
  }
}

}  // namespace

std::string_view to_string(KernelMode mode) {
  return mode == KernelMode::dense ? "dense" : "convolutional";
}

int KernelSpec::required_radius(double epsilon, const GridGeometry& geometry) {
  if (!(epsilon > 0.0)) throw ParameterError("epsilon must be positive");
  // exp(-(r h)^2 / eps) <= 1e-16  <=>  r >= sqrt(16 ln(10) eps) / h
  const double r = std::sqrt(16.0 * std::log(10.0) * epsilon) / geometry.pitch();
  return std::max(1, static_cast<int>(std::ceil(r - 1e-12)));
}

KernelSpec KernelSpec::dense(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ParameterError("epsilon must be positive");
  return {epsilon, KernelMode::dense, 1};
}

KernelSpec KernelSpec::convolutional(double epsilon, const GridGeometry& geometry) {
  return {epsilon, KernelMode::convolutional, required_radius(epsilon, geometry)};
}

KernelSpec KernelSpec::automatic(double epsilon, const GridGeometry& geometry) {
  return geometry.size() <= kDenseLimit ? dense(epsilon) : convolutional(epsilon, geometry);
}

void KernelSpec::validate(const GridGeometry& geometry) const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ParameterError("epsilon must be positive");
  if (truncation_radius < 1) throw ParameterError("truncation radius must be >= 1");
  if (mode == KernelMode::convolutional &&
      truncation_radius < std::min(required_radius(epsilon, geometry), geometry.long_axis() - 1)) {
    throw ParameterError("truncation radius " + std::to_string(truncation_radius) +
                         " leaves boundary taps above 1e-16 (need " +
                         std::to_string(required_radius(epsilon, geometry)) + ")");
  }
  if (mode == KernelMode::dense && geometry.size() > kDenseLimit) {
    throw ScaleError("dense kernel limited to " + std::to_string(kDenseLimit) +
                     " pixels; use convolutional mode");
  }
}

CostMatrix build_cost(const GridGeometry& geometry) {
  const std::size_t n = geometry.size();
  if (n > kDenseLimit) {
    throw ScaleError("dense cost matrix limited to " + std::to_string(kDenseLimit) +
                     " pixels; use convolutional mode");
  }
  const double h = geometry.pitch();
  const int w = geometry.width();
  std::vector<double> c(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const int xi = static_cast<int>(i) % w, yi = static_cast<int>(i) / w;
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = (static_cast<int>(j) % w - xi) * h;
      const double dy = (static_cast<int>(j) / w - yi) * h;
      c[i * n + j] = dx * dx + dy * dy;
    }
  }
  return CostMatrix(geometry, std::move(c));
}

// ---------------------------------------------------------------------------

GibbsKernel::GibbsKernel(const KernelSpec& spec, const GridGeometry& geometry)
    : spec_(spec), geometry_(geometry) {
  spec_.validate(geometry_);
  const double h = geometry_.pitch();
  radius_ = spec_.mode == KernelMode::convolutional
                ? std::min(spec_.truncation_radius, geometry_.long_axis() - 1)
                : geometry_.long_axis() - 1;
  taps_.resize(radius_ + 1);
  log_taps_.resize(radius_ + 1);
  for (int k = 0; k <= radius_; ++k) {
    log_taps_[k] = -(k * h) * (k * h) / spec_.epsilon;
    taps_[k] = std::exp(log_taps_[k]);
  }
  if (spec_.mode == KernelMode::dense) {
    const CostMatrix cost = build_cost(geometry_);
    dense_.resize(cost.entries().size());
    std::transform(cost.entries().begin(), cost.entries().end(), dense_.begin(),
                   [eps = spec_.epsilon](double c) { return std::exp(-c / eps); });
  }
}

void GibbsKernel::apply(std::span<const double> v, std::span<double> out) const {
  const std::size_t n = geometry_.size();
  if (v.size() != n || out.size() != n) throw ParameterError("kernel_apply: size mismatch");
  check_finite(v, "kernel_apply");

  if (spec_.mode == KernelMode::dense) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = dense_.data() + i * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += row[j] * v[j];
      out[i] = s;
    }
    return;
  }

  // Separable pass along x, then along y. Taps are accumulated in a fixed
  // order (k = 0, then +-k outward) so results do not depend on scheduling.
  const int w = geometry_.width(), hgt = geometry_.height();
  const int rx = std::min(radius_, w - 1), ry = std::min(radius_, hgt - 1);
  std::vector<double> tmp(n);
  for (int y = 0; y < hgt; ++y) {
    const double* in = v.data() + static_cast<std::size_t>(y) * w;
    double* o = tmp.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) o[x] = taps_[0] * in[x];
    for (int k = 1; k <= rx; ++k) {
      const double g = taps_[k];
      for (int x = 0; x < w - k; ++x) o[x] += g * in[x + k];
      for (int x = k; x < w; ++x) o[x] += g * in[x - k];
    }
  }
  for (int y = 0; y < hgt; ++y) {
    double* o = out.data() + static_cast<std::size_t>(y) * w;
    const double* c = tmp.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) o[x] = taps_[0] * c[x];
    for (int k = 1; k <= ry; ++k) {
      const double g = taps_[k];
      if (y + k < hgt) {
        const double* a = c + static_cast<std::size_t>(k) * w;
        for (int x = 0; x < w; ++x) o[x] += g * a[x];
      }
      if (y - k >= 0) {
        const double* b = c - static_cast<std::size_t>(k) * w;
        for (int x = 0; x < w; ++x) o[x] += g * b[x];
      }
    }
  }
}

void GibbsKernel::apply_log(std::span<const double> log_v, std::span<double> out) const {
  const std::size_t n = geometry_.size();
  std::vector<double> value(n);
  apply_moment(log_v, Moment::zero, Moment::zero, out, value);
  for (std::size_t i = 0; i < n; ++i) out[i] = value[i] > 0.0 ? out[i] + std::log(value[i]) : kNegInf;
}

void GibbsKernel::apply_moment(std::span<const double> log_v, Moment mx, Moment my,
                               std::span<double> shift, std::span<double> value) const {
  const std::size_t n = geometry_.size();
  if (log_v.size() != n || shift.size() != n || value.size() != n) {
    throw ParameterError("kernel moment: size mismatch");
  }
  for (double x : log_v) {
    if (std::isnan(x) || x == std::numeric_limits<double>::infinity()) {
      throw NumericError("kernel moment: invalid log input");
    }
  }
  if (spec_.mode == KernelMode::dense) {
    dense_moment(log_v, mx, my, shift, value);
  } else {
    conv_moment(log_v, mx, my, shift, value);
  }
}

void GibbsKernel::dense_moment(std::span<const double> log_v, Moment mx, Moment my,
                               std::span<double> shift, std::span<double> value) const {
  const std::size_t n = geometry_.size();
  const int w = geometry_.width();
  const double h = geometry_.pitch();
  const double inv_eps = 1.0 / spec_.epsilon;
  std::vector<double> expo(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int xi = static_cast<int>(i) % w, yi = static_cast<int>(i) / w;
    double m = kNegInf;
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = (static_cast<int>(j) % w - xi) * h;
      const double dy = (static_cast<int>(j) / w - yi) * h;
      expo[j] = log_v[j] - (dx * dx + dy * dy) * inv_eps;
      m = std::max(m, expo[j]);
    }
    double s = 0.0;
    if (m > kNegInf) {
      for (std::size_t j = 0; j < n; ++j) {
        const double dx = (static_cast<int>(j) % w - xi) * h;
        const double dy = (static_cast<int>(j) / w - yi) * h;
        s += std::exp(expo[j] - m) * moment_weight(mx, dx) * moment_weight(my, dy);
      }
    }
    shift[i] = m;
    value[i] = s;
  }
}

namespace {

// One separable pass along a line of `len` samples spaced `stride` apart.
// Input sample j stands for exp(sin[j]) * vin[j]; output i is
// sum_k exp(log_tap(|k|)) * m(k h) * input(i + k) as exp(sout[i]) * vout[i].
void line_moment(const double* sin, const double* vin, std::size_t stride, int len, int radius,
                 const std::vector<double>& log_taps, double h, Moment m, double* sout,
                 double* vout) {
  for (int i = 0; i < len; ++i) {
    const int lo = std::max(0, i - radius), hi = std::min(len - 1, i + radius);
    double mx = kNegInf;
    for (int j = lo; j <= hi; ++j) {
      if (vin[j * stride] == 0.0) continue;
      mx = std::max(mx, sin[j * stride] + log_taps[std::abs(j - i)]);
    }
    double s = 0.0;
    if (mx > kNegInf) {
      for (int j = lo; j <= hi; ++j) {
        const double vj = vin[j * stride];
        if (vj == 0.0) continue;
        s += std::exp(sin[j * stride] + log_taps[std::abs(j - i)] - mx) * moment_weight(m, (j - i) * h) * vj;
      }
    }
    sout[i * stride] = mx;
    vout[i * stride] = s;
  }
}

}  // namespace

void GibbsKernel::conv_moment(std::span<const double> log_v, Moment mx, Moment my,
                              std::span<double> shift, std::span<double> value) const {
  const std::size_t n = geometry_.size();
  const int w = geometry_.width(), hgt = geometry_.height();
  const double h = geometry_.pitch();
  const std::vector<double> ones(n, 1.0);
  std::vector<double> s1(n), v1(n);
  for (int y = 0; y < hgt; ++y) {
    const std::size_t off = static_cast<std::size_t>(y) * w;
    line_moment(log_v.data() + off, ones.data() + off, 1, w, std::min(radius_, w - 1), log_taps_, h,
                mx, s1.data() + off, v1.data() + off);
  }
  for (int x = 0; x < w; ++x) {
    line_moment(s1.data() + x, v1.data() + x, static_cast<std::size_t>(w), hgt,
                std::min(radius_, hgt - 1), log_taps_, h, my, shift.data() + x, value.data() + x);
  }
}

std::vector<double> kernel_apply(std::span<const double> v, const KernelSpec& kernel,
                                 const GridGeometry& geometry) {
  GibbsKernel k(kernel, geometry);
  std::vector<double> out(geometry.size());
  k.apply(v, out);
  return out;
}

}  // namespace floeot
