#pragma once

#include "retscreen/core/grid.hpp"

namespace retscreen::imaging {

struct Rgb {
  float r = 0.0f;
  float g = 0.0f;
  float b = 0.0f;
};

/// Blends masked pixels toward color: v' = (1 - alpha) v + alpha * color.
/// Output is always RGB; unmasked pixels are copied unchanged.
/// Throws kGeometryMismatch, kInvalidArgument for alpha outside [0,1].
PixelGrid overlay(const PixelGrid& grid, const BinaryMask& mask, Rgb color, double alpha);

/// Nearest-neighbour resampling of a mask to a new geometry.
BinaryMask resize_nearest(const BinaryMask& mask, int width, int height);

/// Foreground pixels with at least one 4-neighbour in the background or off-frame.
BinaryMask contour(const BinaryMask& mask);

}  // namespace retscreen::imaging
