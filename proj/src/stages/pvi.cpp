#include "retscreen/stages/pvi.hpp"

#include <cmath>

#include "retscreen/error.hpp"

namespace retscreen::stages {

PviResult pvi_decision(double score, const OperatingPoint& op) {
  if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
    throw Error(Errc::kInvalidArgument, "pvi score outside [0,1]");
  }
  return PviResult{score, score >= op.threshold, op};
}

PviResult detect_pvi(const PixelGrid& image, backends::Backend& backend, const OperatingPoint& op) {
  try {
    auto scores = backend.classify(image, backends::Task::kPvi);
    backends::validate_score_map(scores, backends::Task::kPvi);
    return pvi_decision(scores.at(backends::kPviLabel), op);
  } catch (const Error& e) {
    throw e.with_stage("pvi");
  }
}

double report_score(double score) { return std::round(score * 1e6) / 1e6; }

}  // namespace retscreen::stages
