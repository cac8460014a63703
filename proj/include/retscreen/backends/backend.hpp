#pragma once

#include <array>
#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "retscreen/core/grid.hpp"

namespace retscreen::backends {

enum class Task { kQuality, kPvi, kEdd };

std::string_view task_name(Task task);
/// Throws kInvalidArgument for unknown names.
Task parse_task(std::string_view name);

/// The fixed multi-label diagnosis categories, in report order.
inline constexpr std::array<std::string_view, 6> kDiagnosisLabels = {"AMD", "Cataract", "DR",
                                                                     "Glaucoma", "MMD", "Others"};
inline constexpr std::string_view kGradableLabel = "gradable";
inline constexpr std::string_view kPviLabel = "pvi";

struct ScoreMap {
  std::map<std::string, double> entries;
  std::string model_id;
  double latency_ms = 0.0;

  double at(std::string_view label) const;
};

/// Raw segmentation output before refinement.
struct ProbabilityMask {
  int width = 0;
  int height = 0;
  std::vector<float> probs;

  float at(int x, int y) const {
    return probs[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  /// Pixels with probability >= cut.
  BinaryMask binarize(double cut) const;
  friend bool operator==(const ProbabilityMask&, const ProbabilityMask&) = default;
};

enum class Capability { kClassifyQuality, kClassifyPvi, kClassifyEdd, kSegment };

std::string_view capability_name(Capability cap);
Capability parse_capability(std::string_view name);
Capability capability_for(Task task);

struct BackendDescriptor {
  enum class Kind { kReference, kExternal };

  Kind kind = Kind::kReference;
  std::string model_id = "reference-v1";
  std::set<Capability> capabilities = {Capability::kClassifyQuality, Capability::kClassifyPvi,
                                       Capability::kClassifyEdd, Capability::kSegment};
  std::optional<std::string> endpoint;

  /// Throws kConfigInvalid when an external backend lacks an endpoint.
  void validate() const;
  bool supports(Capability cap) const { return capabilities.count(cap) != 0; }
};

/// Checks a classifier reply against the task's label schema and score range.
/// Throws kMalformedResponse.
void validate_score_map(const ScoreMap& scores, Task task);

/// Throws kMalformedResponse when geometry differs or values leave [0,1].
void validate_probability_mask(const ProbabilityMask& mask, int width, int height);

/// Batch size is always 1: one image per call.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual const BackendDescriptor& descriptor() const = 0;

  /// Throws kUnsupported, kBackendUnavailable, kBackendTimeout, kMalformedResponse.
  virtual ScoreMap classify(const PixelGrid& image, Task task) = 0;
  virtual ProbabilityMask segment(const PixelGrid& image) = 0;
};

struct ClientOptions {
  std::chrono::milliseconds timeout{5000};
  enum class Encoding { kRawF32, kPng } encoding = Encoding::kRawF32;
};

/// Reference descriptors get an in-process ReferenceBackend; external ones a
/// protocol client connecting lazily to descriptor.endpoint.
std::shared_ptr<Backend> make_backend(const BackendDescriptor& descriptor, const ClientOptions& options = {});

}  // namespace retscreen::backends
