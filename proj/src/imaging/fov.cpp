#include "retscreen/imaging/fov.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "retscreen/error.hpp"
#include "retscreen/imaging/morphology.hpp"
#include "retscreen/imaging/transform.hpp"

namespace retscreen::imaging {

FovInfo extract_fov(const PixelGrid& grid, const FovParams& params) {
  const PixelGrid luma = to_gray(grid);
  const auto values = luma.values();
  const float p99 = percentile(std::vector<float>(values.begin(), values.end()), 0.99);
  const double cut = params.threshold_fraction * p99;

  BinaryMask mask(grid.width(), grid.height());
  if (p99 > 0.0f) {
    auto bits = mask.bits();
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = values[i] > cut ? 1 : 0;
  }
  mask = fill_holes(largest_component(mask, Connectivity::kFour));
  if (params.erosion_margin > 0 && mask.any()) {
    mask = erode(mask, StructuringElement::disc(params.erosion_margin));
    mask = largest_component(mask, Connectivity::kFour);
  }

  FovInfo info;
  info.coverage = static_cast<double>(mask.count()) / static_cast<double>(mask.size());
  if (info.coverage < params.min_coverage) {
    std::ostringstream msg;
    msg << "field of view covers " << info.coverage << " of the frame (minimum " << params.min_coverage << ")";
    throw Error(Errc::kNoFov, msg.str());
  }

  int x0 = grid.width();
  int y0 = grid.height();
  int x1 = -1;
  int y1 = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  info.center_x = (x0 + x1) / 2.0;
  info.center_y = (y0 + y1) / 2.0;
  double r2 = 0.0;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (!mask.at(x, y)) continue;
      r2 = std::max(r2, (x - info.center_x) * (x - info.center_x) + (y - info.center_y) * (y - info.center_y));
    }
  }
  info.radius = std::sqrt(r2) + 0.5;
  info.mask = std::move(mask);
  return info;
}

}  // namespace retscreen::imaging
