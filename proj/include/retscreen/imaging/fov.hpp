#pragma once

#include "retscreen/core/grid.hpp"

namespace retscreen::imaging {

struct FovParams {
  double threshold_fraction = 0.06;  // of the 99th-percentile luminance
  int erosion_margin = 3;            // pixels at working resolution
  double min_coverage = 0.05;
};

/// The illuminated fundus disc inside the dark camera frame.
struct FovInfo {
  BinaryMask mask;  // one filled 4-connected component
  double center_x = 0.0;
  double center_y = 0.0;
  double radius = 0.0;
  double coverage = 0.0;  // fraction of the frame
};

/// Thresholds luminance, keeps the largest component, fills holes and erodes
/// by the margin. Center and radius describe the bounding circle of the mask.
/// Throws kNoFov when coverage falls below params.min_coverage.
FovInfo extract_fov(const PixelGrid& grid, const FovParams& params = {});

}  // namespace retscreen::imaging
