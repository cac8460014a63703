#pragma once

#include <optional>
#include <vector>

#include "retscreen/backends/backend.hpp"
#include "retscreen/imaging/fov.hpp"
#include "retscreen/imaging/morphology.hpp"
#include "retscreen/imaging/overlay.hpp"
#include "retscreen/stages/pvi.hpp"

namespace retscreen::stages {

struct LesionConfig {
  double binarize_cut = 0.5;
  int open_radius = 2;
  double min_area_fraction = 0.0005;  // of the FOV area
  double fill_alpha = 0.35;
  imaging::Rgb fill_color{1.0f, 0.85f, 0.0f};
  imaging::Rgb contour_color{1.0f, 1.0f, 0.0f};
  imaging::FovParams fov;
};

struct LesionComponent {
  std::size_t area = 0;
  imaging::BoundingBox bbox;
  friend bool operator==(const LesionComponent&, const LesionComponent&) = default;
};

struct LesionVisualization {
  backends::ProbabilityMask raw;
  BinaryMask refined;
  PixelGrid overlay;  // at the original image resolution
  std::vector<LesionComponent> components;
};

/// remove_small_components(open(binarize(raw) & fov, disc), ceil(fraction * |fov|)).
BinaryMask refine_lesion_mask(const backends::ProbabilityMask& raw, const BinaryMask& fov, const LesionConfig& cfg);

/// Throws kNotGated without a positive gate, kNoFov; backend errors are tagged
/// with stage "vlr". The overlay is drawn on original when given, else on image.
LesionVisualization visualize_lesions(const PixelGrid& image, backends::Backend& backend, const LesionConfig& cfg,
                                      const std::optional<PviResult>& gate, const PixelGrid* original = nullptr);

}  // namespace retscreen::stages
