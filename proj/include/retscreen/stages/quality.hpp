#pragma once

#include <array>
#include <string>
#include <vector>

#include "retscreen/backends/backend.hpp"
#include "retscreen/backends/reference.hpp"

namespace retscreen::stages {

struct QualityConfig {
  double threshold = 0.5;
  int max_attempts = 3;
  // Per-feature floors used to explain an ungradable verdict:
  // coverage, sharpness, illumination uniformity, contrast.
  std::array<double, 4> feature_floors = {0.3, 0.3, 0.8, 0.06};
  backends::ReferenceParams features;
};

struct QualityVerdict {
  bool gradable = false;
  double score = 0.0;
  std::vector<std::string> reasons;
  int attempt = 1;

  friend bool operator==(const QualityVerdict&, const QualityVerdict&) = default;
};

/// gradable <=> score >= cfg.threshold. Reasons are filled from the weakest
/// image features when the capture is not gradable ("no-fov", "low-coverage",
/// "low-sharpness", "uneven-illumination", "low-contrast").
/// Backend errors propagate tagged with stage "quality".
QualityVerdict assess_quality(const PixelGrid& image, backends::Backend& backend, const QualityConfig& cfg,
                              int attempt);

/// Explanatory reasons for a low score, from the reference image features.
std::vector<std::string> weakest_features(const PixelGrid& image, const QualityConfig& cfg);

enum class RecaptureAction { kProceed, kPromptRecapture, kAbandonUngradable };

std::string_view recapture_action_name(RecaptureAction action);

/// Proceed iff gradable; otherwise prompt until attempt reaches max_attempts.
RecaptureAction recapture_decision(const QualityVerdict& verdict, const QualityConfig& cfg);

}  // namespace retscreen::stages
