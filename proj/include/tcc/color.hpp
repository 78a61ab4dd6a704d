#pragma once

// Illuminant arithmetic, von Kries correction and angular error.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcc {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// Positive RGB gain triple. Construction validates; `normalized` rescales
// to unit L2 norm.
class Illuminant {
 public:
  Illuminant() : rgb_{1.0, 1.0, 1.0} {}
  Illuminant(double r, double g, double b) : rgb_{r, g, b} {
    for (double v : rgb_) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw DomainError("illuminant components must be positive and finite");
    }
  }
  explicit Illuminant(const std::array<double, 3>& rgb)
      : Illuminant(rgb[0], rgb[1], rgb[2]) {}

  static Illuminant normalized(double r, double g, double b) {
    double n = std::sqrt(r * r + g * g + b * b);
    if (!(n > 0.0) || !std::isfinite(n))
      throw DomainError("cannot normalize zero-norm illuminant");
    return Illuminant(r / n, g / n, b / n);
  }
  static Illuminant normalized(const std::array<double, 3>& rgb) {
    return normalized(rgb[0], rgb[1], rgb[2]);
  }

  double r() const { return rgb_[0]; }
  double g() const { return rgb_[1]; }
  double b() const { return rgb_[2]; }
  double operator[](std::size_t j) const { return rgb_[j]; }
  const std::array<double, 3>& rgb() const { return rgb_; }

  double norm() const {
    return std::sqrt(rgb_[0] * rgb_[0] + rgb_[1] * rgb_[1] + rgb_[2] * rgb_[2]);
  }
  Illuminant unit() const { return normalized(rgb_); }

  friend Illuminant operator*(const Illuminant& a, const Illuminant& b) {
    return Illuminant(a.r() * b.r(), a.g() * b.g(), a.b() * b.b());
  }
  friend bool operator==(const Illuminant&, const Illuminant&) = default;

 private:
  std::array<double, 3> rgb_;
};

// H x W linear-RGB raster, interleaved (r, g, b) per pixel, row-major.
class ImageFrame {
 public:
  ImageFrame() = default;
  ImageFrame(int height, int width, double fill = 0.0)
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(check_dims(height, width)) * 3, fill) {}
  ImageFrame(int height, int width, std::vector<double> data)
      : height_(height), width_(width), data_(std::move(data)) {
    check_dims(height, width);
    if (data_.size() != static_cast<std::size_t>(height) * width * 3)
      throw DomainError("image data size does not match dimensions");
  }

  static ImageFrame constant(int height, int width, const std::array<double, 3>& rgb) {
    ImageFrame f(height, width);
    for (std::size_t p = 0; p < f.pixel_count(); ++p)
      for (int j = 0; j < 3; ++j) f.data_[p * 3 + j] = rgb[j];
    return f;
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const { return data_.empty(); }

  double& at(int y, int x, int c) { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }
  double at(int y, int x, int c) const { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  std::array<double, 3> channel_means() const {
    std::array<double, 3> m{0, 0, 0};
    for (std::size_t p = 0; p < pixel_count(); ++p)
      for (int j = 0; j < 3; ++j) m[j] += data_[p * 3 + j];
    for (double& v : m) v /= static_cast<double>(std::max<std::size_t>(pixel_count(), 1));
    return m;
  }

  bool valid() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v) && v >= 0.0; });
  }

  friend bool operator==(const ImageFrame&, const ImageFrame&) = default;

 private:
  static int check_dims(int h, int w) {
    if (h < 0 || w < 0) throw DomainError("negative image dimensions");
    return h * w;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// Per-stage estimates of a cascade and their running component-wise products.
struct EstimateTrace {
  std::vector<Illuminant> stage_estimates;
  std::vector<Illuminant> cumulative;
  // Stages whose raw output had a component clamped before correction.
  std::vector<int> clamped_stages;

  std::size_t size() const { return stage_estimates.size(); }
};

namespace detail {
inline double norm3(const std::array<double, 3>& v) {
  return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}
}  // namespace detail

// Angle between two RGB vectors in radians; takes raw triples so that
// near-degenerate test vectors (1e-9 components) are accepted as-is.
// atan2(|a x b|, a . b) equals the clamped arccos of the cosine but keeps
// full precision near 0 and pi.
inline double angle_between(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double na = detail::norm3(a), nb = detail::norm3(b);
  if (!(na > 0.0) || !(nb > 0.0) || !std::isfinite(na) || !std::isfinite(nb))
    throw DomainError("angular error of zero-norm vector");
  const std::array<double, 3> u{a[0] / na, a[1] / na, a[2] / na}, v{b[0] / nb, b[1] / nb, b[2] / nb};
  const std::array<double, 3> cross{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
  const double dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
  return std::atan2(detail::norm3(cross), dot);
}

inline double angular_error(const Illuminant& estimate, const Illuminant& truth) {
  return angle_between(estimate.rgb(), truth.rgb()) * kRadToDeg;
}

inline ImageFrame apply_correction(const ImageFrame& image, const Illuminant& illuminant) {
  ImageFrame out = image;
  auto px = out.data();
  const std::size_t n = out.pixel_count();
  for (std::size_t p = 0; p < n; ++p)
    for (int j = 0; j < 3; ++j) px[p * 3 + j] /= illuminant[j];
  return out;
}

// Inverse of apply_correction: multiplies each channel by the illuminant.
inline ImageFrame apply_cast(const ImageFrame& image, const Illuminant& illuminant) {
  ImageFrame out = image;
  auto px = out.data();
  const std::size_t n = out.pixel_count();
  for (std::size_t p = 0; p < n; ++p)
    for (int j = 0; j < 3; ++j) px[p * 3 + j] *= illuminant[j];
  return out;
}

inline Illuminant cumulative_estimate(std::span<const Illuminant> stage_estimates) {
  if (stage_estimates.empty()) throw DomainError("cumulative estimate of empty cascade");
  std::array<double, 3> prod{1.0, 1.0, 1.0};
  for (const auto& e : stage_estimates)
    for (int j = 0; j < 3; ++j) prod[j] *= e[j];
  return Illuminant::normalized(prod);
}

inline EstimateTrace make_trace(std::span<const Illuminant> stage_estimates) {
  EstimateTrace trace;
  for (std::size_t i = 0; i < stage_estimates.size(); ++i) {
    trace.stage_estimates.push_back(stage_estimates[i]);
    trace.cumulative.push_back(cumulative_estimate(stage_estimates.first(i + 1)));
  }
  return trace;
}

inline Illuminant gray_world(const ImageFrame& image) {
  if (image.empty()) throw DomainError("gray world of empty image");
  auto m = image.channel_means();
  if (!(detail::norm3(m) > 0.0)) throw DomainError("gray world of all-zero image");
  // A single zero channel mean is legitimate for a saturated cast; keep the
  // triple positive so it remains a valid illuminant.
  for (double& v : m) v = std::max(v, 1e-12);
  return Illuminant::normalized(m);
}

}  // namespace tcc
