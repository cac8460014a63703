#include "retscreen/stages/diagnosis.hpp"

#include "retscreen/error.hpp"

namespace retscreen::stages {

double DiagnosisConfig::threshold_for(std::string_view label) const {
  auto it = thresholds.find(std::string(label));
  return it == thresholds.end() ? default_threshold : it->second;
}

DiagnosisVector diagnosis_from_scores(const backends::ScoreMap& scores, const DiagnosisConfig& cfg) {
  backends::validate_score_map(scores, backends::Task::kEdd);
  DiagnosisVector d;
  for (auto label : backends::kDiagnosisLabels) {
    const std::string key(label);
    const double p = scores.at(label);
    const double t = cfg.threshold_for(label);
    d.probs[key] = p;
    d.per_label_thresholds[key] = t;
    if (p >= t) d.positives.push_back(key);
  }
  return d;
}

DiagnosisVector diagnose(const PixelGrid& image, backends::Backend& backend, const DiagnosisConfig& cfg,
                         const std::optional<PviResult>& gate) {
  if (!gate || !gate->decision) {
    throw Error(Errc::kNotGated, "diagnosis requires a positive PVI decision").with_stage("edd");
  }
  try {
    return diagnosis_from_scores(backend.classify(image, backends::Task::kEdd), cfg);
  } catch (const Error& e) {
    throw e.with_stage("edd");
  }
}

}  // namespace retscreen::stages
