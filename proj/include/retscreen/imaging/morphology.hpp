#pragma once

#include <cstdint>
#include <vector>

#include "retscreen/core/grid.hpp"

namespace retscreen::imaging {

/// Centered digital disc: offsets (dx,dy) with dx^2 + dy^2 <= radius^2.
/// Radius 1 is the 4-neighborhood plus center.
class StructuringElement {
 public:
  /// Throws kInvalidArgument for radius < 1.
  static StructuringElement disc(int radius);

  int radius() const noexcept { return radius_; }
  /// Horizontal half-width of the disc on row dy, |dy| <= radius.
  int half_width(int dy) const noexcept { return half_widths_[static_cast<std::size_t>(dy + radius_)]; }

 private:
  explicit StructuringElement(int radius);
  int radius_;
  std::vector<int> half_widths_;
};

// Out-of-frame pixels are background for every operation below.
BinaryMask erode(const BinaryMask& mask, const StructuringElement& se);
BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se);
BinaryMask open(const BinaryMask& mask, const StructuringElement& se);
/// Computed on a frame padded by the radius so closing stays extensive at the border.
BinaryMask close(const BinaryMask& mask, const StructuringElement& se);

struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;  // inclusive
  int y1 = 0;  // inclusive
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Component {
  int id = 0;  // 1-based label in the label image
  std::size_t area = 0;
  BoundingBox bbox;
};

enum class Connectivity { kFour, kEight };

struct Labeling {
  std::vector<std::int32_t> labels;  // 0 = background
  std::vector<Component> components;  // ordered by first pixel in raster order
};

Labeling label_components(const BinaryMask& mask, Connectivity connectivity = Connectivity::kEight);

/// 8-connected components of the foreground.
std::vector<Component> connected_components(const BinaryMask& mask);

/// Drops 8-connected components whose area is below min_area.
BinaryMask remove_small_components(const BinaryMask& mask, std::size_t min_area);

/// Keeps only the largest component (ties: first in raster order).
BinaryMask largest_component(const BinaryMask& mask, Connectivity connectivity);

/// Sets every background pixel not 4-connected to the frame border.
BinaryMask fill_holes(const BinaryMask& mask);

}  // namespace retscreen::imaging
