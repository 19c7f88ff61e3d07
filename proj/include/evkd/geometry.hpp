#pragma once

#include <cmath>

#include "evkd/core.hpp"

namespace evkd {

/// Axis-aligned box, top-left corner plus size, in pixels.
struct Box {
  double x = 0, y = 0, w = 0, h = 0;

  double cx() const noexcept { return x + 0.5 * w; }
  double cy() const noexcept { return y + 0.5 * h; }
  double area() const noexcept { return w > 0 && h > 0 ? w * h : 0.0; }
  bool valid() const noexcept { return w > 0 && h > 0 && std::isfinite(x) && std::isfinite(y); }

  static Box from_center(double cx, double cy, double w, double h) noexcept {
    return {cx - 0.5 * w, cy - 0.5 * h, w, h};
  }
  Box scaled(double s) const noexcept { return {x * s, y * s, w * s, h * s}; }

  friend bool operator==(const Box&, const Box&) = default;
};

struct CropSpec {
  double context_factor = 2.0;
  Index out_size = 128;
  double expansion = 1.0;

  double side_for(const Box& box) const { return context_factor * expansion * std::sqrt(box.w * box.h); }
};

inline constexpr CropSpec kTemplateCrop{2.0, 128, 1.0};
inline constexpr CropSpec kSearchCrop{4.0, 256, 1.0};

/// Where a square crop sits in image coordinates.
struct CropWindow {
  double left = 0;
  double top = 0;
  double side = 0;
  Index out_size = 0;

  double scale() const noexcept { return side / static_cast<double>(out_size); }
  /// Image coordinate of output sample `u` (pixel-area aligned).
  double source_x(Index u) const noexcept { return left + (static_cast<double>(u) + 0.5) * scale() - 0.5; }
  double source_y(Index v) const noexcept { return top + (static_cast<double>(v) + 0.5) * scale() - 0.5; }
};

CropWindow crop_window(const Box& box, const CropSpec& spec);

/// Bilinear sample with out-of-image taps reading zero. Pixel (r, c) has
/// its center at continuous coordinate (c, r).
template <typename Derived>
typename Derived::Scalar sample_bilinear(const Eigen::MatrixBase<Derived>& image, double x, double y) {
  using Scalar = typename Derived::Scalar;
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto c0 = static_cast<Index>(fx);
  const auto r0 = static_cast<Index>(fy);
  const double ax = x - fx;
  const double ay = y - fy;
  auto tap = [&](Index r, Index c) -> double {
    if (r < 0 || c < 0 || r >= image.rows() || c >= image.cols()) return 0.0;
    return static_cast<double>(image(r, c));
  };
  double v = 0;
  // Skip zero-weight taps so exact-grid samples never read past the border.
  if ((1 - ax) * (1 - ay) != 0) v += (1 - ax) * (1 - ay) * tap(r0, c0);
  if (ax * (1 - ay) != 0) v += ax * (1 - ay) * tap(r0, c0 + 1);
  if ((1 - ax) * ay != 0) v += (1 - ax) * ay * tap(r0 + 1, c0);
  if (ax * ay != 0) v += ax * ay * tap(r0 + 1, c0 + 1);
  return static_cast<Scalar>(v);
}

/// Square crop of side context*expansion*sqrt(w*h) centered on the box,
/// resampled to out_size x out_size.
template <typename Derived>
Grid<typename Derived::Scalar> crop_region(const Eigen::MatrixBase<Derived>& image, const Box& box,
                                           const CropSpec& spec) {
  if (image.size() == 0) throw Error(Errc::InvalidArgument, "empty image");
  const CropWindow win = crop_window(box, spec);
  Grid<typename Derived::Scalar> out(win.out_size, win.out_size);
  for (Index v = 0; v < win.out_size; ++v) {
    const double sy = win.source_y(v);
    for (Index u = 0; u < win.out_size; ++u) out(v, u) = sample_bilinear(image, win.source_x(u), sy);
  }
  return out;
}

double iou(const Box& a, const Box& b) noexcept;

double center_error(const Box& pred, const Box& gt) noexcept;

/// Center offset divided per axis by the ground-truth size.
double normalized_center_error(const Box& pred, const Box& gt) noexcept;

struct TokenLayout {
  Index per_axis = 0;
  Index total = 0;
};

TokenLayout patch_token_layout(Index side, Index patch);

}  // namespace evkd
