#include "retscreen/error.hpp"

namespace retscreen {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kAllOneClass: return "all-one-class";
    case Errc::kGeometryMismatch: return "geometry-mismatch";
    case Errc::kInvalidArgument: return "invalid-argument";
    case Errc::kDecodeError: return "decode-error";
    case Errc::kBadGamma: return "bad-gamma";
    case Errc::kNoFov: return "no-fov";
    case Errc::kUnsupported: return "unsupported";
    case Errc::kBackendUnavailable: return "backend-unavailable";
    case Errc::kBackendTimeout: return "backend-timeout";
    case Errc::kMalformedResponse: return "malformed-response";
    case Errc::kNotGated: return "not-gated";
    case Errc::kConfigInvalid: return "config-invalid";
    case Errc::kIdCollision: return "id-collision";
    case Errc::kNotFound: return "not-found";
    case Errc::kInvalidState: return "invalid-state";
    case Errc::kNotEligible: return "not-eligible";
    case Errc::kAlreadyReferred: return "already-referred";
    case Errc::kCorruptLog: return "corrupt-log";
    case Errc::kIoError: return "io-error";
    case Errc::kBindError: return "bind-error";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

Error Error::with_stage(std::string stage) const {
  Error e = *this;
  e.stage_ = std::move(stage);
  return e;
}

Error Error::with_seq(std::int64_t seq) const {
  Error e = *this;
  e.seq_ = seq;
  return e;
}

}  // namespace retscreen
