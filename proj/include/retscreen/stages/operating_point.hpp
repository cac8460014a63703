#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "retscreen/core/metrics.hpp"

namespace retscreen::stages {

enum class Policy { kTargetSensitivity, kTargetSpecificity, kYouden };

std::string_view policy_name(Policy policy);
/// Throws kInvalidArgument.
Policy parse_policy(std::string_view name);

/// Threshold above every score in [0,1]: nothing is called positive.
double above_all_threshold();

inline constexpr std::string_view kTargetUnattainedFlag = "+target-unattained";

struct OperatingPoint {
  double threshold = 0.5;
  Policy policy = Policy::kYouden;
  std::optional<double> target;
  double achieved_sensitivity = 0.0;
  double achieved_specificity = 0.0;
  std::string calibration_set_id;

  bool target_unattained() const;
  friend bool operator==(const OperatingPoint&, const OperatingPoint&) = default;
};

/// Picks a threshold from the distinct sample scores plus the above-all
/// sentinel, under the rule score >= threshold -> positive.
///  - target-sensitivity: among thresholds with sensitivity >= target, the one
///    with the highest specificity; if none, the highest-sensitivity point.
///  - target-specificity: mirror image.
///  - youden: maximizes sensitivity + specificity - 1.
/// Ties go to the higher threshold. An unattainable target appends
/// kTargetUnattainedFlag to the calibration set id.
/// Throws kAllOneClass, kInvalidArgument (missing/out-of-range target).
OperatingPoint calibrate_operating_point(std::span<const LabeledScore> samples, Policy policy,
                                         std::optional<double> target, std::string calibration_set_id = {});

/// "sha256:<16 hex>" over the canonical CSV form of the samples.
std::string calibration_fingerprint(std::span<const LabeledScore> samples);

nlohmann::json to_json(const OperatingPoint& op);
/// Throws kConfigInvalid.
OperatingPoint operating_point_from_json(const nlohmann::json& j);
/// Throws kConfigInvalid naming the path when missing or malformed.
OperatingPoint load_operating_point(const std::filesystem::path& path);

}  // namespace retscreen::stages
