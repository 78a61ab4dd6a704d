#pragma once

// Geometric resampling on ImageFrame. All sampling is bilinear with edge
// replication outside the source, so constant images stay constant.

#include <cmath>
#include <numbers>

#include "tcc/autodiff.hpp"
#include "tcc/color.hpp"

namespace tcc {

// Axis-aligned region in source pixel units (may be fractional).
struct Box {
  double x0 = 0, y0 = 0, width = 0, height = 0;
};

namespace detail {
inline void sample_bilinear(const ImageFrame& src, double sx, double sy, double out[3]) {
  const int W = src.width(), H = src.height();
  sx = std::clamp(sx, 0.0, static_cast<double>(W - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(H - 1));
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(x0 + 1, W - 1);
  const int y1 = std::min(y0 + 1, H - 1);
  const double fx = sx - x0, fy = sy - y0;
  for (int c = 0; c < 3; ++c) {
    const double top = src.at(y0, x0, c) + fx * (src.at(y0, x1, c) - src.at(y0, x0, c));
    const double bot = src.at(y1, x0, c) + fx * (src.at(y1, x1, c) - src.at(y1, x0, c));
    out[c] = top + fy * (bot - top);
  }
}
}  // namespace detail

// Samples `box` of `src` onto an out_h x out_w grid (pixel-centre aligned).
inline ImageFrame resample_box(const ImageFrame& src, const Box& box, int out_h, int out_w) {
  if (src.empty()) throw DomainError("resample of empty image");
  if (out_h <= 0 || out_w <= 0) throw DomainError("resample target must be positive");
  ImageFrame out(out_h, out_w);
  const double sx = box.width / out_w, sy = box.height / out_h;
  double px[3];
  for (int y = 0; y < out_h; ++y) {
    const double src_y = box.y0 + (y + 0.5) * sy - 0.5;
    for (int x = 0; x < out_w; ++x) {
      detail::sample_bilinear(src, box.x0 + (x + 0.5) * sx - 0.5, src_y, px);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = px[c];
    }
  }
  return out;
}

inline ImageFrame resize(const ImageFrame& src, int out_h, int out_w) {
  if (src.height() == out_h && src.width() == out_w) return src;
  return resample_box(src, {0.0, 0.0, static_cast<double>(src.width()),
                            static_cast<double>(src.height())},
                      out_h, out_w);
}

// Rotation about the image centre, same output size.
inline ImageFrame rotate(const ImageFrame& src, double degrees) {
  if (degrees == 0.0) return src;
  const double t = degrees * std::numbers::pi / 180.0;
  const double ct = std::cos(t), st = std::sin(t);
  const double cx = (src.width() - 1) / 2.0, cy = (src.height() - 1) / 2.0;
  ImageFrame out(src.height(), src.width());
  double px[3];
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      const double dx = x - cx, dy = y - cy;
      detail::sample_bilinear(src, cx + ct * dx + st * dy, cy - st * dx + ct * dy, px);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = px[c];
    }
  }
  return out;
}

inline ImageFrame flip_horizontal(const ImageFrame& src) {
  ImageFrame out(src.height(), src.width());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = src.at(y, src.width() - 1 - x, c);
  return out;
}

// Interleaved HWC frame -> planar {3, H, W} constant tensor.
inline ad::Var to_tensor(const ImageFrame& f) {
  const std::size_t plane = f.pixel_count();
  std::vector<double> v(plane * 3);
  auto d = f.data();
  for (std::size_t p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c) v[c * plane + p] = d[p * 3 + c];
  return ad::constant({3, f.height(), f.width()}, std::move(v));
}

inline ImageFrame from_tensor(const ad::Var& t) {
  if (t.dims().size() != 3 || t.dims()[0] != 3) throw DomainError("from_tensor: expected {3,H,W}");
  const int H = t.dims()[1], W = t.dims()[2];
  ImageFrame f(H, W);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  auto d = f.data();
  for (std::size_t p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c) d[p * 3 + c] = t[c * plane + p];
  return f;
}

}  // namespace tcc
