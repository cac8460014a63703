#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "retscreen/backends/backend.hpp"
#include "retscreen/pipeline/session.hpp"
#include "retscreen/stages/diagnosis.hpp"
#include "retscreen/stages/lesions.hpp"
#include "retscreen/stages/operating_point.hpp"
#include "retscreen/stages/quality.hpp"

namespace retscreen::pipeline {

struct StageBackendDescriptors {
  backends::BackendDescriptor quality;
  backends::BackendDescriptor pvi;
  backends::BackendDescriptor edd;
  backends::BackendDescriptor vlr;
};

/// One JSON document:
/// {
///   "working_resolution": 512,
///   "eyes": ["left", "right"],
///   "quality": {"threshold": 0.5, "max_attempts": 3},
///   "operating_point": "op.json",            (relative to the config file)
///   "diagnosis": {"default_threshold": 0.5, "thresholds": {"AMD": 0.5}},
///   "lesions": {"binarize": 0.5, "open_radius": 2, "min_area_fraction": 0.0005, "alpha": 0.35},
///   "backends": {"quality": {"kind": "reference"}, "pvi": ..., "edd": ..., "vlr": ...},
///   "timeout_ms": 5000,
///   "image_encoding": "f32le-b64",
///   "referral_destination": "...",
///   "store": "sessions"                       (optional; in-memory when absent)
/// }
struct PipelineConfig {
  int working_resolution = 512;
  std::vector<Eye> eyes = {Eye::kLeft, Eye::kRight};
  stages::QualityConfig quality;
  std::filesystem::path operating_point_path;
  stages::OperatingPoint operating_point;
  stages::DiagnosisConfig diagnosis;
  stages::LesionConfig lesions;
  StageBackendDescriptors backends;
  backends::ClientOptions client;
  std::string referral_destination = "tertiary eye hospital";
  std::optional<std::filesystem::path> store_root;

  /// Throws kConfigInvalid.
  void validate() const;
};

/// Relative paths resolve against base_dir. Loads the operating point file.
/// Throws kConfigInvalid (naming the operating-point path when it is missing).
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

/// Inverse of config_from_json (operating point written as its path).
nlohmann::json config_to_json(const PipelineConfig& cfg);

}  // namespace retscreen::pipeline
