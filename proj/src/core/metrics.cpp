#include "retscreen/core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "retscreen/error.hpp"

namespace retscreen {

std::optional<double> ConfusionCounts::sensitivity() const {
  if (tp + fn == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

std::optional<double> ConfusionCounts::specificity() const {
  if (tn + fp == 0) return std::nullopt;
  return static_cast<double>(tn) / static_cast<double>(tn + fp);
}

void validate_scores(std::span<const LabeledScore> samples) {
  for (const auto& s : samples) {
    if (!std::isfinite(s.score) || s.score < 0.0 || s.score > 1.0) {
      throw Error(Errc::kInvalidArgument, "score outside [0,1]: " + std::to_string(s.score));
    }
  }
}

RocCurve compute_roc(std::span<const LabeledScore> samples) {
  validate_scores(samples);
  std::int64_t pos = 0;
  for (const auto& s : samples) pos += s.label ? 1 : 0;
  const std::int64_t neg = static_cast<std::int64_t>(samples.size()) - pos;
  if (pos == 0 || neg == 0) {
    throw Error(Errc::kAllOneClass, "ROC needs at least one positive and one negative sample");
  }

  std::vector<LabeledScore> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const LabeledScore& a, const LabeledScore& b) { return a.score > b.score; });

  // Sweep thresholds from high to low; counts are of samples with score >= t.
  struct Step {
    double threshold;
    std::int64_t tp;
    std::int64_t fp;
  };
  std::vector<Step> steps;
  steps.push_back({std::nextafter(sorted.front().score, std::numeric_limits<double>::infinity()), 0, 0});
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double t = sorted[i].score;
    while (i < sorted.size() && sorted[i].score == t) {
      (sorted[i].label ? tp : fp) += 1;
      ++i;
    }
    steps.push_back({t, tp, fp});
  }

  // Trapezoids accumulated in integer units of 1/(2*pos*neg).
  std::uint64_t twice_area = 0;
  for (std::size_t i = 1; i < steps.size(); ++i) {
    const auto dfp = static_cast<std::uint64_t>(steps[i].fp - steps[i - 1].fp);
    twice_area += dfp * static_cast<std::uint64_t>(steps[i].tp + steps[i - 1].tp);
  }

  RocCurve curve;
  curve.points.reserve(steps.size());
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    curve.points.push_back({it->threshold, static_cast<double>(it->tp) / static_cast<double>(pos),
                            static_cast<double>(it->fp) / static_cast<double>(neg)});
  }
  curve.auc = static_cast<double>(twice_area) /
              (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return curve;
}

ConfusionCounts confusion_at(std::span<const LabeledScore> samples, double threshold) {
  ConfusionCounts c;
  for (const auto& s : samples) {
    const bool predicted = s.score >= threshold;
    if (s.label) {
      (predicted ? c.tp : c.fn) += 1;
    } else {
      (predicted ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

double dice(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_geometry(b)) {
    throw Error(Errc::kGeometryMismatch, "dice: masks differ in geometry");
  }
  std::size_t inter = 0;
  std::size_t total = 0;
  const auto ab = a.bits();
  const auto bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    inter += static_cast<std::size_t>(ab[i] & bb[i]);
    total += static_cast<std::size_t>(ab[i]) + static_cast<std::size_t>(bb[i]);
  }
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

std::vector<LabeledScore> read_scores_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::kInvalidArgument, "scores csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "score,label") {
    throw Error(Errc::kInvalidArgument, "scores csv: expected header 'score,label'");
  }
  std::vector<LabeledScore> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(Errc::kInvalidArgument, "scores csv: line " + std::to_string(lineno) + " lacks a comma");
    }
    LabeledScore s;
    try {
      std::size_t used = 0;
      s.score = std::stod(line.substr(0, comma), &used);
    } catch (const std::exception&) {
      throw Error(Errc::kInvalidArgument, "scores csv: bad score on line " + std::to_string(lineno));
    }
    const std::string label = line.substr(comma + 1);
    if (label == "1") {
      s.label = true;
    } else if (label == "0") {
      s.label = false;
    } else {
      throw Error(Errc::kInvalidArgument, "scores csv: label must be 0 or 1 on line " + std::to_string(lineno));
    }
    out.push_back(s);
  }
  validate_scores(out);
  return out;
}

void write_scores_csv(std::ostream& out, std::span<const LabeledScore> samples) {
  out << "score,label\n";
  std::ostringstream line;
  line.precision(17);
  for (const auto& s : samples) {
    line.str({});
    line << s.score << ',' << (s.label ? 1 : 0) << '\n';
    out << line.str();
  }
}

}  // namespace retscreen
