#pragma once

#include <span>
#include <vector>

#include "retscreen/core/grid.hpp"

namespace retscreen::imaging {

/// Rec. 601 luma for RGB, identity for gray. Always single-channel.
PixelGrid to_gray(const PixelGrid& grid);
PixelGrid to_rgb(const PixelGrid& grid);

/// Bilinear resampling with pixel-center alignment and edge clamping.
PixelGrid resize(const PixelGrid& grid, int width, int height);

/// v -> v^gamma. Throws kBadGamma unless gamma is finite and > 0.
PixelGrid gamma_correct(const PixelGrid& grid, double gamma);

PixelGrid flip_h(const PixelGrid& grid);

/// Counter-clockwise (as displayed) rotation about the frame center, bilinear,
/// out-of-frame samples read as 0. Geometry is preserved.
PixelGrid rotate(const PixelGrid& grid, double degrees);

/// Zoom about the frame center by factor (> 1 enlarges), zero-filled.
PixelGrid scale_about_center(const PixelGrid& grid, double factor);

/// Per-channel mean over a (2r+1)^2 window clipped to the frame.
PixelGrid box_blur(const PixelGrid& grid, int radius);

/// Window mean of a single plane over the frame, restricted to `support`
/// pixels when given. Pixels whose window holds no support read as 0.
std::vector<double> box_mean(std::span<const float> plane, int width, int height, int radius,
                             const BinaryMask* support = nullptr);

/// Lower nearest-rank percentile, q in [0,1]. Empty input yields 0.
float percentile(std::vector<float> values, double q);

}  // namespace retscreen::imaging
