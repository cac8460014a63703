#include "retscreen/backends/backend.hpp"

#include <cmath>

#include "retscreen/backends/external.hpp"
#include "retscreen/backends/reference.hpp"
#include "retscreen/error.hpp"

namespace retscreen::backends {

std::string_view task_name(Task task) {
  switch (task) {
    case Task::kQuality: return "quality";
    case Task::kPvi: return "pvi";
    case Task::kEdd: return "edd";
  }
  return "unknown";
}

Task parse_task(std::string_view name) {
  if (name == "quality") return Task::kQuality;
  if (name == "pvi") return Task::kPvi;
  if (name == "edd") return Task::kEdd;
  throw Error(Errc::kInvalidArgument, "unknown task '" + std::string(name) + "'");
}

std::string_view capability_name(Capability cap) {
  switch (cap) {
    case Capability::kClassifyQuality: return "classify-quality";
    case Capability::kClassifyPvi: return "classify-pvi";
    case Capability::kClassifyEdd: return "classify-edd";
    case Capability::kSegment: return "segment";
  }
  return "unknown";
}

Capability parse_capability(std::string_view name) {
  for (auto cap : {Capability::kClassifyQuality, Capability::kClassifyPvi, Capability::kClassifyEdd,
                   Capability::kSegment}) {
    if (capability_name(cap) == name) return cap;
  }
  throw Error(Errc::kConfigInvalid, "unknown backend capability '" + std::string(name) + "'");
}

Capability capability_for(Task task) {
  switch (task) {
    case Task::kQuality: return Capability::kClassifyQuality;
    case Task::kPvi: return Capability::kClassifyPvi;
    case Task::kEdd: return Capability::kClassifyEdd;
  }
  return Capability::kClassifyQuality;
}

double ScoreMap::at(std::string_view label) const {
  const auto it = entries.find(std::string(label));
  if (it == entries.end()) {
    throw Error(Errc::kMalformedResponse, "score map lacks label '" + std::string(label) + "'");
  }
  return it->second;
}

BinaryMask ProbabilityMask::binarize(double cut) const {
  BinaryMask mask(width, height);
  auto bits = mask.bits();
  for (std::size_t i = 0; i < probs.size(); ++i) bits[i] = probs[i] >= cut ? 1 : 0;
  return mask;
}

void BackendDescriptor::validate() const {
  if (model_id.empty()) throw Error(Errc::kConfigInvalid, "backend descriptor needs a model_id");
  if (kind == Kind::kExternal && (!endpoint || endpoint->empty())) {
    throw Error(Errc::kConfigInvalid, "external backend '" + model_id + "' requires an endpoint");
  }
}

void validate_score_map(const ScoreMap& scores, Task task) {
  std::set<std::string> expected;
  switch (task) {
    case Task::kQuality: expected = {std::string(kGradableLabel)}; break;
    case Task::kPvi: expected = {std::string(kPviLabel)}; break;
    case Task::kEdd:
      for (auto l : kDiagnosisLabels) expected.emplace(l);
      break;
  }
  for (const auto& label : expected) {
    if (!scores.entries.count(label)) {
      throw Error(Errc::kMalformedResponse,
                  std::string(task_name(task)) + " reply is missing label '" + label + "'");
    }
  }
  for (const auto& [label, value] : scores.entries) {
    if (!expected.count(label)) {
      throw Error(Errc::kMalformedResponse,
                  std::string(task_name(task)) + " reply has unexpected label '" + label + "'");
    }
    if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
      throw Error(Errc::kMalformedResponse, "score for '" + label + "' outside [0,1]");
    }
  }
}

void validate_probability_mask(const ProbabilityMask& mask, int width, int height) {
  if (mask.width != width || mask.height != height) {
    throw Error(Errc::kMalformedResponse, "segmentation mask geometry " + std::to_string(mask.width) + "x" +
                                              std::to_string(mask.height) + " does not match image " +
                                              std::to_string(width) + "x" + std::to_string(height));
  }
  if (mask.probs.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(Errc::kMalformedResponse, "segmentation mask value count does not match geometry");
  }
  for (float p : mask.probs) {
    if (!std::isfinite(p) || p < 0.0f || p > 1.0f) {
      throw Error(Errc::kMalformedResponse, "segmentation probability outside [0,1]");
    }
  }
}

std::shared_ptr<Backend> make_backend(const BackendDescriptor& descriptor, const ClientOptions& options) {
  descriptor.validate();
  if (descriptor.kind == BackendDescriptor::Kind::kReference) {
    return std::make_shared<ReferenceBackend>(descriptor);
  }
  return std::make_shared<ExternalBackend>(descriptor, options);
}

}  // namespace retscreen::backends
