#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "retscreen/stages/diagnosis.hpp"
#include "retscreen/stages/lesions.hpp"
#include "retscreen/stages/quality.hpp"

namespace retscreen::pipeline {

enum class Eye { kLeft, kRight };

std::string_view eye_name(Eye eye);
/// Throws kInvalidArgument.
Eye parse_eye(std::string_view name);

enum class SessionState { kAwaitingCapture, kQualityReview, kScreening, kCompleted, kReferred, kCompletedUngradable };

std::string_view state_name(SessionState state);

enum class EventKind {
  kCaptureSubmitted,
  kQualityAssessed,
  kRecapturePrompted,
  kPviAssessed,
  kDiagnosed,
  kLesionsVisualized,
  kReportGenerated,
  kReferralIssued,
  kAbandoned,
};

std::string_view event_kind_name(EventKind kind);
/// Throws kInvalidArgument.
EventKind parse_event_kind(std::string_view name);

struct SessionEvent {
  std::int64_t seq = 0;
  std::string ts;
  EventKind kind = EventKind::kCaptureSubmitted;
  nlohmann::json payload = nlohmann::json::object();

  friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

/// One line of the event log: {"kind","payload","seq","ts"}.
std::string serialize_event(const SessionEvent& event);
/// Throws kCorruptLog (with the line's seq when it can be read).
SessionEvent parse_event(std::string_view line);

struct SessionHeader {
  std::string session_id;
  std::string patient_ref;
  std::vector<Eye> eyes = {Eye::kLeft, Eye::kRight};
  int max_attempts = 3;
  std::string created_at;

  friend bool operator==(const SessionHeader&, const SessionHeader&) = default;
};

nlohmann::json to_json(const SessionHeader& header);
/// Throws kCorruptLog.
SessionHeader header_from_json(const nlohmann::json& j);

struct StageFailure {
  std::string stage;
  std::string code;
  std::string message;
  friend bool operator==(const StageFailure&, const StageFailure&) = default;
};

struct LesionRecord {
  std::vector<stages::LesionComponent> components;
  std::string overlay_asset;
  std::string mask_asset;
  friend bool operator==(const LesionRecord&, const LesionRecord&) = default;
};

enum class EyeStatus { kAwaitingCapture, kInReview, kReviewed, kAccepted, kAbandoned };

struct EyeSlot {
  EyeStatus status = EyeStatus::kAwaitingCapture;
  int attempts = 0;
  std::vector<std::string> capture_assets;
  std::vector<stages::QualityVerdict> verdicts;
  bool pvi_done = false;
  std::optional<double> pvi_score;
  std::optional<bool> pvi_decision;
  double pvi_threshold = 0.0;
  bool edd_done = false;
  std::optional<stages::DiagnosisVector> diagnosis;
  bool vlr_done = false;
  std::optional<LesionRecord> lesions;
  std::vector<StageFailure> failures;

  bool stage_failed() const;
  friend bool operator==(const EyeSlot&, const EyeSlot&) = default;
};

struct ReferralRecord {
  std::string session_id;
  std::string issued_at;
  std::string reason;  // "pvi-positive" | "ungradable"
  std::string destination;
  friend bool operator==(const ReferralRecord&, const ReferralRecord&) = default;
};

nlohmann::json to_json(const ReferralRecord& record);
ReferralRecord referral_from_json(const nlohmann::json& j);

/// Session state is a pure fold of its events: live operations and replay
/// both go through apply().
class Session {
 public:
  Session() = default;
  explicit Session(SessionHeader header);

  const SessionHeader& header() const { return header_; }
  const std::string& id() const { return header_.session_id; }
  SessionState state() const { return state_; }
  const std::map<Eye, EyeSlot>& eyes() const { return eyes_; }
  const EyeSlot& eye(Eye eye) const;
  const std::vector<SessionEvent>& events() const { return events_; }
  const std::map<std::string, double>& timings() const { return timings_; }
  const std::optional<nlohmann::json>& report() const { return report_; }
  const std::optional<ReferralRecord>& referral() const { return referral_; }

  std::int64_t next_seq() const { return static_cast<std::int64_t>(events_.size()) + 1; }
  bool has_eye(Eye eye) const { return eyes_.count(eye) != 0; }
  bool can_capture(Eye eye) const;
  /// Eye whose capture is waiting for its quality verdict, if any.
  std::optional<Eye> eye_in_review() const;
  bool ready_to_report() const;

  /// True when any eye is PVI-positive, was abandoned as ungradable, or had a
  /// screening stage fail.
  bool referral_recommended() const;
  /// "pvi-positive" when any eye is positive, else "ungradable".
  std::string referral_reason() const;

  /// Validates the event against the current state and folds it in.
  /// Throws kInvalidState carrying the event's seq.
  void apply(const SessionEvent& event);

  friend bool operator==(const Session&, const Session&) = default;

 private:
  void apply_unchecked(const SessionEvent& event);
  EyeSlot& slot(Eye eye);

  SessionHeader header_;
  SessionState state_ = SessionState::kAwaitingCapture;
  std::map<Eye, EyeSlot> eyes_;
  std::vector<SessionEvent> events_;
  std::map<std::string, double> timings_;
  std::optional<nlohmann::json> report_;
  std::optional<ReferralRecord> referral_;
};

/// Rebuilds a session from its header and log. Throws kCorruptLog with the
/// offending seq on gaps, schema violations or illegal transitions.
Session replay(const SessionHeader& header, const std::vector<SessionEvent>& events);

// JSON forms shared by event payloads and reports.
nlohmann::json to_json(const stages::QualityVerdict& verdict);
stages::QualityVerdict verdict_from_json(const nlohmann::json& j);
nlohmann::json to_json(const stages::DiagnosisVector& diagnosis);
stages::DiagnosisVector diagnosis_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StageFailure& failure);

}  // namespace retscreen::pipeline
