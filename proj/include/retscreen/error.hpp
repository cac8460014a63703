#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace retscreen {

enum class Errc {
  kAllOneClass,
  kGeometryMismatch,
  kInvalidArgument,
  kDecodeError,
  kBadGamma,
  kNoFov,
  kUnsupported,
  kBackendUnavailable,
  kBackendTimeout,
  kMalformedResponse,
  kNotGated,
  kConfigInvalid,
  kIdCollision,
  kNotFound,
  kInvalidState,
  kNotEligible,
  kAlreadyReferred,
  kCorruptLog,
  kIoError,
  kBindError,
};

/// Stable kebab-case name used in JSON error envelopes and logs.
std::string_view errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

  // Pipeline stage that raised the error ("quality", "pvi", "edd", "vlr"), if any.
  const std::string& stage() const noexcept { return stage_; }
  Error with_stage(std::string stage) const;

  // Offending event sequence number for kCorruptLog.
  std::optional<std::int64_t> seq() const noexcept { return seq_; }
  Error with_seq(std::int64_t seq) const;

 private:
  Errc code_;
  std::string stage_;
  std::optional<std::int64_t> seq_;
};

}  // namespace retscreen
