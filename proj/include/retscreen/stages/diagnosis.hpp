#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "retscreen/backends/backend.hpp"
#include "retscreen/stages/pvi.hpp"

namespace retscreen::stages {

struct DiagnosisConfig {
  double default_threshold = 0.5;
  std::map<std::string, double> thresholds;  // per-label overrides

  double threshold_for(std::string_view label) const;
};

struct DiagnosisVector {
  std::map<std::string, double> probs;
  std::vector<std::string> positives;  // in kDiagnosisLabels order
  std::map<std::string, double> per_label_thresholds;

  friend bool operator==(const DiagnosisVector&, const DiagnosisVector&) = default;
};

/// positives = labels with prob >= threshold. Throws kMalformedResponse.
DiagnosisVector diagnosis_from_scores(const backends::ScoreMap& scores, const DiagnosisConfig& cfg);

/// Throws kNotGated unless gate holds a positive decision; backend errors are
/// tagged with stage "edd".
DiagnosisVector diagnose(const PixelGrid& image, backends::Backend& backend, const DiagnosisConfig& cfg,
                         const std::optional<PviResult>& gate);

}  // namespace retscreen::stages
