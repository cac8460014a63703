#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "retscreen/core/grid.hpp"

namespace retscreen {

/// A classifier score paired with its ground truth (true = positive class).
struct LabeledScore {
  double score = 0.0;
  bool label = false;
};

struct RocPoint {
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

/// Points are ordered by ascending threshold; the first point (lowest score)
/// is (1,1) and the last point is a sentinel just above the highest score,
/// giving (0,0).
struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  // Absent when the denominator is zero.
  std::optional<double> sensitivity() const;
  std::optional<double> specificity() const;

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Throws kInvalidArgument for scores outside [0,1] or non-finite.
void validate_scores(std::span<const LabeledScore> samples);

/// ROC with one point per distinct score under the rule score >= t -> positive.
/// Throws kAllOneClass when either class is absent.
RocCurve compute_roc(std::span<const LabeledScore> samples);

ConfusionCounts confusion_at(std::span<const LabeledScore> samples, double threshold);

/// 2|A∩B| / (|A|+|B|); 1.0 when both masks are empty.
/// Throws kGeometryMismatch.
double dice(const BinaryMask& a, const BinaryMask& b);

/// Scored-sample interchange: CSV with header `score,label`, label in {0,1}.
std::vector<LabeledScore> read_scores_csv(std::istream& in);
void write_scores_csv(std::ostream& out, std::span<const LabeledScore> samples);

}  // namespace retscreen
