#include "retscreen/stages/quality.hpp"

#include <algorithm>

#include "retscreen/error.hpp"

namespace retscreen::stages {

std::vector<std::string> weakest_features(const PixelGrid& image, const QualityConfig& cfg) {
  const auto f = backends::reference_quality_features(image, cfg.features);
  if (f.no_fov) return {"no-fov"};
  static constexpr std::array<const char*, 4> kNames = {"low-coverage", "low-sharpness", "uneven-illumination",
                                                        "low-contrast"};
  const std::array<double, 4> values = {f.fov_coverage, f.sharpness, f.illumination_uniformity, f.contrast};
  std::vector<std::string> reasons;
  std::size_t weakest = 0;
  double weakest_ratio = 1e300;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double floor = cfg.feature_floors[i];
    if (values[i] < floor) reasons.emplace_back(kNames[i]);
    const double ratio = floor > 0.0 ? values[i] / floor : values[i];
    if (ratio < weakest_ratio) {
      weakest_ratio = ratio;
      weakest = i;
    }
  }
  if (reasons.empty()) reasons.emplace_back(kNames[weakest]);
  return reasons;
}

QualityVerdict assess_quality(const PixelGrid& image, backends::Backend& backend, const QualityConfig& cfg,
                              int attempt) {
  if (attempt < 1) throw Error(Errc::kInvalidArgument, "capture attempt numbers start at 1");
  backends::ScoreMap scores;
  try {
    scores = backend.classify(image, backends::Task::kQuality);
    backends::validate_score_map(scores, backends::Task::kQuality);
  } catch (const Error& e) {
    throw e.with_stage("quality");
  }
  QualityVerdict v;
  v.attempt = attempt;
  v.score = scores.at(backends::kGradableLabel);
  v.gradable = v.score >= cfg.threshold;
  if (!v.gradable) v.reasons = weakest_features(image, cfg);
  return v;
}

std::string_view recapture_action_name(RecaptureAction action) {
  switch (action) {
    case RecaptureAction::kProceed: return "proceed";
    case RecaptureAction::kPromptRecapture: return "prompt-recapture";
    case RecaptureAction::kAbandonUngradable: return "abandon-ungradable";
  }
  return "unknown";
}

RecaptureAction recapture_decision(const QualityVerdict& verdict, const QualityConfig& cfg) {
  if (verdict.gradable) return RecaptureAction::kProceed;
  if (verdict.attempt < cfg.max_attempts) return RecaptureAction::kPromptRecapture;
  return RecaptureAction::kAbandonUngradable;
}

}  // namespace retscreen::stages
