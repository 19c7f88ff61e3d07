#include "evkd/geometry.hpp"

#include <algorithm>
#include <string>

namespace evkd {

CropWindow crop_window(const Box& box, const CropSpec& spec) {
  if (!(box.w > 0) || !(box.h > 0)) {
    throw Error(Errc::DegenerateBox, "box size " + std::to_string(box.w) + "x" + std::to_string(box.h));
  }
  if (!(spec.context_factor > 0) || spec.out_size <= 0 || !(spec.expansion >= 1.0)) {
    throw Error(Errc::InvalidArgument, "crop spec needs context > 0, out_size > 0, expansion >= 1");
  }
  const double side = spec.side_for(box);
  return {box.cx() - 0.5 * side, box.cy() - 0.5 * side, side, spec.out_size};
}

double iou(const Box& a, const Box& b) noexcept {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double center_error(const Box& pred, const Box& gt) noexcept {
  return std::hypot(pred.cx() - gt.cx(), pred.cy() - gt.cy());
}

double normalized_center_error(const Box& pred, const Box& gt) noexcept {
  return std::hypot((pred.cx() - gt.cx()) / gt.w, (pred.cy() - gt.cy()) / gt.h);
}

TokenLayout patch_token_layout(Index side, Index patch) {
  if (side <= 0 || patch <= 0 || side % patch != 0) {
    throw Error(Errc::NonDivisible,
                "patch " + std::to_string(patch) + " does not divide side " + std::to_string(side));
  }
  const Index per_axis = side / patch;
  return {per_axis, per_axis * per_axis};
}

}  // namespace evkd
