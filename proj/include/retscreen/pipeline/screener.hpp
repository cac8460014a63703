#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "retscreen/backends/backend.hpp"
#include "retscreen/imaging/codec.hpp"
#include "retscreen/pipeline/clock.hpp"
#include "retscreen/pipeline/config.hpp"
#include "retscreen/pipeline/session.hpp"
#include "retscreen/pipeline/store.hpp"

namespace retscreen::pipeline {

struct StageBackends {
  std::shared_ptr<backends::Backend> quality;
  std::shared_ptr<backends::Backend> pvi;
  std::shared_ptr<backends::Backend> edd;
  std::shared_ptr<backends::Backend> vlr;
};

/// Builds one backend per stage from the descriptors; identical descriptors
/// share an instance.
StageBackends make_stage_backends(const PipelineConfig& cfg);

/// Downscales so the longest side is at most longest_side; smaller images
/// are returned unchanged (upsampling turns pixel noise into lesion-sized blobs).
PixelGrid to_working_resolution(const PixelGrid& image, int longest_side);

enum class NextAction { kPromptRecapture, kEyeAccepted, kSessionReadyToScreen, kSessionUngradable };

std::string_view next_action_name(NextAction action);

struct CaptureOutcome {
  NextAction action = NextAction::kPromptRecapture;
  stages::QualityVerdict verdict;
};

/// Drives sessions through capture, quality review, screening and referral.
/// Every state change is an event appended to the store and folded into the
/// cached session; operations on one session are serialized.
class Screener {
 public:
  Screener(PipelineConfig cfg, std::shared_ptr<SessionStore> store,
           std::shared_ptr<Clock> clock = system_clock());
  Screener(PipelineConfig cfg, StageBackends stage_backends, std::shared_ptr<SessionStore> store,
           std::shared_ptr<Clock> clock = system_clock());

  /// Throws kIdCollision, kInvalidArgument (bad id).
  Session create_session(const std::string& patient_ref, std::optional<std::string> session_id = std::nullopt);

  /// Throws kNotFound, kInvalidState, kInvalidArgument (eye not configured),
  /// kDecodeError. Quality backend failures are recorded as ungradable attempts.
  CaptureOutcome submit_capture(const std::string& session_id, Eye eye, const imaging::Bytes& image_bytes);

  /// Returns report.json. Stage failures are recorded and flagged for manual
  /// review instead of propagating. Throws kNotFound, kInvalidState.
  nlohmann::json run_screening(const std::string& session_id);

  /// Throws kNotFound, kInvalidState, kNotEligible, kAlreadyReferred.
  ReferralRecord issue_referral(const std::string& session_id, std::optional<std::string> destination = std::nullopt);

  /// Snapshot; loads and replays from the store when not cached.
  Session session(const std::string& session_id);
  imaging::Bytes asset(const std::string& session_id, const std::string& name);
  /// Drops the session from the cache and the store.
  void forget(const std::string& session_id);

  const PipelineConfig& config() const { return cfg_; }
  SessionStore& store() { return *store_; }

 private:
  struct Slot {
    std::mutex mu;
    std::optional<Session> session;
    std::map<Eye, PixelGrid> original;
    std::map<Eye, PixelGrid> working;
  };

  std::shared_ptr<Slot> slot_for(const std::string& session_id);
  Session& loaded(Slot& slot, const std::string& session_id);
  void record(Session& session, EventKind kind, nlohmann::json payload);
  void generate_report(Session& session);
  PixelGrid to_working(const PixelGrid& image) const;
  void ensure_images(Slot& slot, const Session& session, Eye eye);
  std::string new_session_id();

  PipelineConfig cfg_;
  StageBackends backends_;
  std::shared_ptr<SessionStore> store_;
  std::shared_ptr<Clock> clock_;
  std::mutex slots_mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
};

}  // namespace retscreen::pipeline
