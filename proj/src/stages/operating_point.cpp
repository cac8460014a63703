#include "retscreen/stages/operating_point.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "retscreen/error.hpp"

namespace retscreen::stages {

std::string_view policy_name(Policy policy) {
  switch (policy) {
    case Policy::kTargetSensitivity: return "target-sensitivity";
    case Policy::kTargetSpecificity: return "target-specificity";
    case Policy::kYouden: return "youden";
  }
  return "unknown";
}

Policy parse_policy(std::string_view name) {
  for (auto p : {Policy::kTargetSensitivity, Policy::kTargetSpecificity, Policy::kYouden}) {
    if (policy_name(p) == name) return p;
  }
  throw Error(Errc::kInvalidArgument, "unknown policy '" + std::string(name) + "'");
}

double above_all_threshold() { return std::nextafter(1.0, 2.0); }

bool OperatingPoint::target_unattained() const {
  return calibration_set_id.size() >= kTargetUnattainedFlag.size() &&
         calibration_set_id.compare(calibration_set_id.size() - kTargetUnattainedFlag.size(),
                                    kTargetUnattainedFlag.size(), kTargetUnattainedFlag) == 0;
}

namespace {

struct Candidate {
  double threshold;
  std::int64_t tp;
  std::int64_t tn;
};

}  // namespace

OperatingPoint calibrate_operating_point(std::span<const LabeledScore> samples, Policy policy,
                                         std::optional<double> target, std::string calibration_set_id) {
  validate_scores(samples);
  std::int64_t pos = 0;
  for (const auto& s : samples) pos += s.label ? 1 : 0;
  const std::int64_t neg = static_cast<std::int64_t>(samples.size()) - pos;
  if (pos == 0 || neg == 0) throw Error(Errc::kAllOneClass, "calibration needs both classes");
  if (policy != Policy::kYouden) {
    if (!target || !std::isfinite(*target) || *target < 0.0 || *target > 1.0) {
      throw Error(Errc::kInvalidArgument, std::string(policy_name(policy)) + " needs a target in [0,1]");
    }
  }

  std::vector<LabeledScore> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const LabeledScore& a, const LabeledScore& b) { return a.score < b.score; });

  // Ascending sweep: at threshold t, samples below t are called negative.
  std::vector<Candidate> candidates;
  std::int64_t fn = 0;
  std::int64_t tn = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double t = sorted[i].score;
    candidates.push_back({t, pos - fn, tn});
    while (i < sorted.size() && sorted[i].score == t) {
      (sorted[i].label ? fn : tn) += 1;
      ++i;
    }
  }
  candidates.push_back({above_all_threshold(), 0, neg});

  auto sens = [&](const Candidate& c) { return static_cast<double>(c.tp) / static_cast<double>(pos); };
  auto spec = [&](const Candidate& c) { return static_cast<double>(c.tn) / static_cast<double>(neg); };

  // Candidates are in ascending threshold order, so ">=" comparisons keep the
  // later (higher) threshold on ties.
  const Candidate* best = nullptr;
  bool unattained = false;
  switch (policy) {
    case Policy::kYouden:
      for (const auto& c : candidates) {
        // J compared exactly as tp*neg + tn*pos.
        if (!best || c.tp * neg + c.tn * pos >= best->tp * neg + best->tn * pos) best = &c;
      }
      break;
    case Policy::kTargetSensitivity:
      for (const auto& c : candidates) {
        if (sens(c) >= *target && (!best || c.tn >= best->tn)) best = &c;
      }
      if (!best) {
        unattained = true;
        for (const auto& c : candidates) {
          if (!best || c.tp >= best->tp) best = &c;
        }
      }
      break;
    case Policy::kTargetSpecificity:
      for (const auto& c : candidates) {
        if (spec(c) >= *target && (!best || c.tp >= best->tp)) best = &c;
      }
      if (!best) {
        unattained = true;
        for (const auto& c : candidates) {
          if (!best || c.tn >= best->tn) best = &c;
        }
      }
      break;
  }

  OperatingPoint op;
  op.threshold = best->threshold;
  op.policy = policy;
  if (policy != Policy::kYouden) op.target = target;
  op.achieved_sensitivity = sens(*best);
  op.achieved_specificity = spec(*best);
  op.calibration_set_id = calibration_set_id.empty() ? calibration_fingerprint(samples) : std::move(calibration_set_id);
  if (unattained) op.calibration_set_id += kTargetUnattainedFlag;
  return op;
}

std::string calibration_fingerprint(std::span<const LabeledScore> samples) {
  std::ostringstream csv;
  write_scores_csv(csv, samples);
  const std::string text = csv.str();
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), digest);
  std::string hex = "sha256:";
  char buf[3];
  for (int i = 0; i < 8; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

nlohmann::json to_json(const OperatingPoint& op) {
  nlohmann::json j{{"threshold", op.threshold},
                   {"policy", policy_name(op.policy)},
                   {"achieved_sensitivity", op.achieved_sensitivity},
                   {"achieved_specificity", op.achieved_specificity},
                   {"calibration_set_id", op.calibration_set_id}};
  j["target"] = op.target ? nlohmann::json(*op.target) : nlohmann::json(nullptr);
  return j;
}

OperatingPoint operating_point_from_json(const nlohmann::json& j) {
  try {
    OperatingPoint op;
    op.threshold = j.at("threshold").get<double>();
    op.policy = parse_policy(j.at("policy").get<std::string>());
    if (j.contains("target") && !j["target"].is_null()) op.target = j["target"].get<double>();
    op.achieved_sensitivity = j.value("achieved_sensitivity", 0.0);
    op.achieved_specificity = j.value("achieved_specificity", 0.0);
    op.calibration_set_id = j.value("calibration_set_id", std::string());
    if (!std::isfinite(op.threshold) || op.threshold < 0.0 || op.threshold > above_all_threshold()) {
      throw Error(Errc::kConfigInvalid, "operating point threshold outside [0,1]");
    }
    return op;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kConfigInvalid, std::string("operating point: ") + e.what());
  } catch (const Error& e) {
    throw Error(Errc::kConfigInvalid, e.what());
  }
}

OperatingPoint load_operating_point(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kConfigInvalid, "operating point file not found: " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::kConfigInvalid, "operating point file is not JSON: " + path.string());
  try {
    return operating_point_from_json(j);
  } catch (const Error& e) {
    throw Error(Errc::kConfigInvalid, path.string() + ": " + e.what());
  }
}

}  // namespace retscreen::stages
