#include "retscreen/pipeline/session.hpp"

#include <algorithm>
#include <array>

#include "retscreen/error.hpp"

namespace retscreen::pipeline {

using nlohmann::json;

std::string_view eye_name(Eye eye) { return eye == Eye::kLeft ? "left" : "right"; }

Eye parse_eye(std::string_view name) {
  if (name == "left") return Eye::kLeft;
  if (name == "right") return Eye::kRight;
  throw Error(Errc::kInvalidArgument, "eye must be left or right, got '" + std::string(name) + "'");
}

std::string_view state_name(SessionState state) {
  switch (state) {
    case SessionState::kAwaitingCapture: return "awaiting-capture";
    case SessionState::kQualityReview: return "quality-review";
    case SessionState::kScreening: return "screening";
    case SessionState::kCompleted: return "completed";
    case SessionState::kReferred: return "referred";
    case SessionState::kCompletedUngradable: return "completed-ungradable";
  }
  return "unknown";
}

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 9> kKindNames = {{
    {EventKind::kCaptureSubmitted, "CaptureSubmitted"},
    {EventKind::kQualityAssessed, "QualityAssessed"},
    {EventKind::kRecapturePrompted, "RecapturePrompted"},
    {EventKind::kPviAssessed, "PviAssessed"},
    {EventKind::kDiagnosed, "Diagnosed"},
    {EventKind::kLesionsVisualized, "LesionsVisualized"},
    {EventKind::kReportGenerated, "ReportGenerated"},
    {EventKind::kReferralIssued, "ReferralIssued"},
    {EventKind::kAbandoned, "Abandoned"},
}};

}  // namespace

std::string_view event_kind_name(EventKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

EventKind parse_event_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw Error(Errc::kInvalidArgument, "unknown event kind '" + std::string(name) + "'");
}

std::string serialize_event(const SessionEvent& event) {
  json j{{"seq", event.seq}, {"ts", event.ts}, {"kind", event_kind_name(event.kind)}, {"payload", event.payload}};
  return j.dump();
}

SessionEvent parse_event(std::string_view line) {
  const auto j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::kCorruptLog, "event line is not a JSON object");
  std::optional<std::int64_t> seq;
  if (j.contains("seq") && j["seq"].is_number_integer()) seq = j["seq"].get<std::int64_t>();
  try {
    SessionEvent ev;
    ev.seq = j.at("seq").get<std::int64_t>();
    ev.ts = j.at("ts").get<std::string>();
    ev.kind = parse_event_kind(j.at("kind").get<std::string>());
    ev.payload = j.at("payload");
    if (!ev.payload.is_object()) throw Error(Errc::kCorruptLog, "payload must be an object");
    return ev;
  } catch (const std::exception& e) {
    Error err(Errc::kCorruptLog, std::string("malformed event: ") + e.what());
    throw seq ? err.with_seq(*seq) : err;
  }
}

json to_json(const SessionHeader& header) {
  json eyes = json::array();
  for (auto e : header.eyes) eyes.push_back(eye_name(e));
  return json{{"session_id", header.session_id}, {"patient_ref", header.patient_ref}, {"eyes", eyes},
              {"max_attempts", header.max_attempts}, {"created_at", header.created_at}};
}

SessionHeader header_from_json(const json& j) {
  try {
    SessionHeader h;
    h.session_id = j.at("session_id").get<std::string>();
    h.patient_ref = j.at("patient_ref").get<std::string>();
    h.eyes.clear();
    for (const auto& e : j.at("eyes")) h.eyes.push_back(parse_eye(e.get<std::string>()));
    h.max_attempts = j.at("max_attempts").get<int>();
    h.created_at = j.at("created_at").get<std::string>();
    if (h.eyes.empty() || h.max_attempts < 1) throw Error(Errc::kCorruptLog, "header needs eyes and max_attempts >= 1");
    return h;
  } catch (const std::exception& e) {
    throw Error(Errc::kCorruptLog, std::string("malformed session header: ") + e.what());
  }
}

json to_json(const ReferralRecord& r) {
  return json{{"session_id", r.session_id}, {"issued_at", r.issued_at}, {"reason", r.reason},
              {"destination", r.destination}};
}

ReferralRecord referral_from_json(const json& j) {
  ReferralRecord r{j.at("session_id").get<std::string>(), j.at("issued_at").get<std::string>(),
                   j.at("reason").get<std::string>(), j.at("destination").get<std::string>()};
  if (r.reason != "pvi-positive" && r.reason != "ungradable") {
    throw Error(Errc::kInvalidArgument, "unknown referral reason '" + r.reason + "'");
  }
  return r;
}

json to_json(const stages::QualityVerdict& v) {
  return json{{"attempt", v.attempt}, {"gradable", v.gradable}, {"score", v.score}, {"reasons", v.reasons}};
}

stages::QualityVerdict verdict_from_json(const json& j) {
  stages::QualityVerdict v;
  v.attempt = j.at("attempt").get<int>();
  v.gradable = j.at("gradable").get<bool>();
  v.score = j.at("score").get<double>();
  v.reasons = j.at("reasons").get<std::vector<std::string>>();
  return v;
}

json to_json(const stages::DiagnosisVector& d) {
  return json{{"probs", d.probs}, {"positives", d.positives}, {"thresholds", d.per_label_thresholds}};
}

stages::DiagnosisVector diagnosis_from_json(const json& j) {
  stages::DiagnosisVector d;
  d.probs = j.at("probs").get<std::map<std::string, double>>();
  d.positives = j.at("positives").get<std::vector<std::string>>();
  d.per_label_thresholds = j.at("thresholds").get<std::map<std::string, double>>();
  return d;
}

json to_json(const StageFailure& f) { return json{{"stage", f.stage}, {"code", f.code}, {"message", f.message}}; }

bool EyeSlot::stage_failed() const {
  return std::any_of(failures.begin(), failures.end(), [](const StageFailure& f) { return f.stage != "quality"; });
}

Session::Session(SessionHeader header) : header_(std::move(header)) {
  for (auto e : header_.eyes) eyes_[e] = EyeSlot{};
}

const EyeSlot& Session::eye(Eye eye) const {
  auto it = eyes_.find(eye);
  if (it == eyes_.end()) throw Error(Errc::kInvalidArgument, "eye not part of this session");
  return it->second;
}

EyeSlot& Session::slot(Eye eye) {
  auto it = eyes_.find(eye);
  if (it == eyes_.end()) throw Error(Errc::kInvalidState, "eye not part of this session");
  return it->second;
}

bool Session::can_capture(Eye eye) const {
  if (state_ != SessionState::kAwaitingCapture || !has_eye(eye)) return false;
  const auto& s = eyes_.at(eye);
  return s.status == EyeStatus::kAwaitingCapture && s.attempts < header_.max_attempts;
}

std::optional<Eye> Session::eye_in_review() const {
  for (const auto& [e, s] : eyes_) {
    if (s.status == EyeStatus::kInReview || s.status == EyeStatus::kReviewed) return e;
  }
  return std::nullopt;
}

bool Session::ready_to_report() const {
  if (state_ == SessionState::kCompletedUngradable) return !report_;
  if (state_ != SessionState::kScreening) return false;
  for (const auto& [e, s] : eyes_) {
    if (s.status != EyeStatus::kAccepted || !s.pvi_done) return false;
    if (s.pvi_decision.value_or(false) && (!s.edd_done || !s.vlr_done)) return false;
  }
  return true;
}

bool Session::referral_recommended() const {
  for (const auto& [e, s] : eyes_) {
    if (s.status == EyeStatus::kAbandoned || s.pvi_decision.value_or(false) || s.stage_failed()) return true;
  }
  return false;
}

std::string Session::referral_reason() const {
  for (const auto& [e, s] : eyes_) {
    if (s.pvi_decision.value_or(false)) return "pvi-positive";
  }
  return "ungradable";
}

namespace {

[[noreturn]] void reject(const SessionEvent& ev, const std::string& why) {
  throw Error(Errc::kInvalidState, std::string(event_kind_name(ev.kind)) + " at seq " + std::to_string(ev.seq) +
                                       ": " + why)
      .with_seq(ev.seq);
}

std::optional<StageFailure> payload_failure(const json& p) {
  if (!p.contains("error") || p["error"].is_null()) return std::nullopt;
  const auto& e = p["error"];
  return StageFailure{e.at("stage").get<std::string>(), e.at("code").get<std::string>(),
                      e.at("message").get<std::string>()};
}

double payload_ms(const json& p) {
  const double ms = p.at("ms").get<double>();
  if (!(ms >= 0.0)) throw Error(Errc::kInvalidArgument, "negative stage timing");
  return ms;
}

}  // namespace

void Session::apply(const SessionEvent& event) {
  if (event.seq != next_seq()) {
    reject(event, "expected seq " + std::to_string(next_seq()));
  }
  try {
    apply_unchecked(event);
  } catch (const Error& e) {
    if (e.code() == Errc::kInvalidState && e.seq()) throw;
    reject(event, e.what());
  } catch (const json::exception& e) {
    reject(event, std::string("payload schema: ") + e.what());
  }
  events_.push_back(event);
}

// Every branch reads and checks the payload completely before mutating, so a
// rejected event leaves the session untouched.
void Session::apply_unchecked(const SessionEvent& ev) {
  const json& p = ev.payload;
  const int max_attempts = header_.max_attempts;
  switch (ev.kind) {
    case EventKind::kCaptureSubmitted: {
      const Eye e = parse_eye(p.at("eye").get<std::string>());
      const int attempt = p.at("attempt").get<int>();
      auto asset = p.at("asset").get<std::string>();
      if (!has_eye(e)) reject(ev, "eye not configured");
      auto& s = slot(e);
      if (state_ != SessionState::kAwaitingCapture || s.status != EyeStatus::kAwaitingCapture) {
        reject(ev, "capture not allowed in state " + std::string(state_name(state_)));
      }
      if (attempt != s.attempts + 1 || attempt > max_attempts) reject(ev, "attempt out of sequence");
      s.attempts = attempt;
      s.capture_assets.push_back(std::move(asset));
      s.status = EyeStatus::kInReview;
      state_ = SessionState::kQualityReview;
      return;
    }
    case EventKind::kQualityAssessed: {
      const Eye e = parse_eye(p.at("eye").get<std::string>());
      auto verdict = verdict_from_json(p);
      const double ms = payload_ms(p);
      auto failure = payload_failure(p);
      if (!has_eye(e)) reject(ev, "eye not configured");
      auto& s = slot(e);
      if (state_ != SessionState::kQualityReview || s.status != EyeStatus::kInReview) reject(ev, "no capture in review");
      if (verdict.attempt != s.attempts) reject(ev, "verdict attempt does not match capture");
      if (failure && verdict.gradable) reject(ev, "failed assessment cannot be gradable");
      s.verdicts.push_back(std::move(verdict));
      if (failure) s.failures.push_back(std::move(*failure));
      timings_["quality"] += ms;
      if (s.verdicts.back().gradable) {
        s.status = EyeStatus::kAccepted;
        const bool all = std::all_of(eyes_.begin(), eyes_.end(),
                                     [](const auto& kv) { return kv.second.status == EyeStatus::kAccepted; });
        state_ = all ? SessionState::kScreening : SessionState::kAwaitingCapture;
      } else {
        s.status = EyeStatus::kReviewed;
      }
      return;
    }
    case EventKind::kRecapturePrompted:
    case EventKind::kAbandoned: {
      const Eye e = parse_eye(p.at("eye").get<std::string>());
      const int attempt = p.at("attempt").get<int>();
      if (!has_eye(e)) reject(ev, "eye not configured");
      auto& s = slot(e);
      if (state_ != SessionState::kQualityReview || s.status != EyeStatus::kReviewed) {
        reject(ev, "no ungradable verdict pending");
      }
      if (attempt != s.attempts) reject(ev, "attempt does not match");
      if (ev.kind == EventKind::kRecapturePrompted) {
        if (s.attempts >= max_attempts) reject(ev, "capture attempts exhausted");
        s.status = EyeStatus::kAwaitingCapture;
        state_ = SessionState::kAwaitingCapture;
      } else {
        if (p.at("reason").get<std::string>() != "ungradable-after-retries") reject(ev, "unknown abandon reason");
        if (s.attempts < max_attempts) reject(ev, "attempts remain");
        s.status = EyeStatus::kAbandoned;
        state_ = SessionState::kCompletedUngradable;
      }
      return;
    }
    case EventKind::kPviAssessed: {
      const Eye e = parse_eye(p.at("eye").get<std::string>());
      const double ms = payload_ms(p);
      auto failure = payload_failure(p);
      const double threshold = p.at("threshold").get<double>();
      std::optional<double> score;
      std::optional<bool> decision;
      if (!failure) {
        score = p.at("score").get<double>();
        decision = p.at("decision").get<bool>();
        if (!(*score >= 0.0 && *score <= 1.0)) reject(ev, "score outside [0,1]");
        if (*decision != (*score >= threshold)) reject(ev, "decision disagrees with threshold");
      }
      if (!has_eye(e)) reject(ev, "eye not configured");
      auto& s = slot(e);
      if (state_ != SessionState::kScreening || s.status != EyeStatus::kAccepted || s.pvi_done) {
        reject(ev, "pvi not expected");
      }
      s.pvi_done = true;
      s.pvi_score = score;
      s.pvi_decision = decision;
      s.pvi_threshold = threshold;
      if (failure) s.failures.push_back(std::move(*failure));
      timings_["pvi"] += ms;
      return;
    }
    case EventKind::kDiagnosed:
    case EventKind::kLesionsVisualized: {
      const bool edd = ev.kind == EventKind::kDiagnosed;
      const Eye e = parse_eye(p.at("eye").get<std::string>());
      const double ms = payload_ms(p);
      auto failure = payload_failure(p);
      std::optional<stages::DiagnosisVector> diagnosis;
      std::optional<LesionRecord> lesions;
      if (!failure && edd) diagnosis = diagnosis_from_json(p.at("diagnosis"));
      if (!failure && !edd) {
        LesionRecord rec;
        for (const auto& c : p.at("components")) {
          const auto b = c.at("bbox").get<std::array<int, 4>>();
          rec.components.push_back({c.at("area").get<std::size_t>(), {b[0], b[1], b[2], b[3]}});
        }
        rec.overlay_asset = p.at("overlay").get<std::string>();
        rec.mask_asset = p.at("mask").get<std::string>();
        lesions = std::move(rec);
      }
      if (!has_eye(e)) reject(ev, "eye not configured");
      auto& s = slot(e);
      if (state_ != SessionState::kScreening) reject(ev, "not screening");
      if (!s.pvi_decision.value_or(false)) reject(ev, "gating violated: PVI not positive for this eye");
      if (edd ? s.edd_done : s.vlr_done) reject(ev, "stage already ran");
      if (edd) {
        s.edd_done = true;
        s.diagnosis = std::move(diagnosis);
      } else {
        s.vlr_done = true;
        s.lesions = std::move(lesions);
      }
      if (failure) s.failures.push_back(std::move(*failure));
      timings_[edd ? "edd" : "vlr"] += ms;
      return;
    }
    case EventKind::kReportGenerated: {
      const json& report = p.at("report");
      const bool recommended = report.at("referral_recommended").get<bool>();
      if (!ready_to_report()) reject(ev, "report not expected in state " + std::string(state_name(state_)));
      if (recommended != referral_recommended()) reject(ev, "referral_recommended disagrees with session");
      report_ = report;
      if (state_ == SessionState::kScreening) state_ = SessionState::kCompleted;
      return;
    }
    case EventKind::kReferralIssued: {
      auto record = referral_from_json(p);
      if (referral_) reject(ev, "already referred");
      if ((state_ != SessionState::kCompleted && state_ != SessionState::kCompletedUngradable) || !report_) {
        reject(ev, "session not completed");
      }
      if (!referral_recommended()) reject(ev, "referral not recommended");
      if (record.session_id != header_.session_id) reject(ev, "referral for another session");
      referral_ = std::move(record);
      state_ = SessionState::kReferred;
      return;
    }
  }
  reject(ev, "unhandled kind");
}

Session replay(const SessionHeader& header, const std::vector<SessionEvent>& events) {
  Session s(header);
  for (const auto& ev : events) {
    try {
      s.apply(ev);
    } catch (const Error& e) {
      throw Error(Errc::kCorruptLog, e.what()).with_seq(ev.seq);
    }
  }
  return s;
}

}  // namespace retscreen::pipeline
