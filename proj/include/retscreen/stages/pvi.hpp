#pragma once

#include "retscreen/backends/backend.hpp"
#include "retscreen/stages/operating_point.hpp"

namespace retscreen::stages {

struct PviResult {
  double score = 0.0;
  bool decision = false;  // score >= operating_point.threshold
  OperatingPoint operating_point;

  friend bool operator==(const PviResult&, const PviResult&) = default;
};

/// Applies the decision rule to an already computed score.
PviResult pvi_decision(double score, const OperatingPoint& op);

/// Backend errors propagate tagged with stage "pvi".
PviResult detect_pvi(const PixelGrid& image, backends::Backend& backend, const OperatingPoint& op);

/// Score as written into reports: rounded to 6 decimal places.
double report_score(double score);

}  // namespace retscreen::stages
