#include "retscreen/pipeline/screener.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "retscreen/error.hpp"
#include "retscreen/imaging/transform.hpp"
#include "retscreen/pipeline/report.hpp"
#include "retscreen/stages/diagnosis.hpp"
#include "retscreen/stages/lesions.hpp"
#include "retscreen/stages/pvi.hpp"

namespace retscreen::pipeline {

using nlohmann::json;

StageBackends make_stage_backends(const PipelineConfig& cfg) {
  std::vector<std::pair<const backends::BackendDescriptor*, std::shared_ptr<backends::Backend>>> built;
  auto get = [&](const backends::BackendDescriptor& d) {
    for (const auto& [desc, b] : built) {
      if (desc->kind == d.kind && desc->model_id == d.model_id && desc->endpoint == d.endpoint &&
          desc->capabilities == d.capabilities) {
        return b;
      }
    }
    auto b = backends::make_backend(d, cfg.client);
    built.emplace_back(&d, b);
    return b;
  };
  return StageBackends{get(cfg.backends.quality), get(cfg.backends.pvi), get(cfg.backends.edd), get(cfg.backends.vlr)};
}

std::string_view next_action_name(NextAction action) {
  switch (action) {
    case NextAction::kPromptRecapture: return "prompt-recapture";
    case NextAction::kEyeAccepted: return "eye-accepted";
    case NextAction::kSessionReadyToScreen: return "ready-to-screen";
    case NextAction::kSessionUngradable: return "abandon-ungradable";
  }
  return "unknown";
}

Screener::Screener(PipelineConfig cfg, std::shared_ptr<SessionStore> store, std::shared_ptr<Clock> clock)
    : Screener(cfg, make_stage_backends(cfg), std::move(store), std::move(clock)) {}

Screener::Screener(PipelineConfig cfg, StageBackends stage_backends, std::shared_ptr<SessionStore> store,
                   std::shared_ptr<Clock> clock)
    : cfg_(std::move(cfg)), backends_(std::move(stage_backends)), store_(std::move(store)), clock_(std::move(clock)) {
  cfg_.validate();
  if (!backends_.quality || !backends_.pvi || !backends_.edd || !backends_.vlr || !store_ || !clock_) {
    throw Error(Errc::kConfigInvalid, "screener needs a backend per stage, a store and a clock");
  }
}

std::string Screener::new_session_id() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mu);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "s%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

std::shared_ptr<Screener::Slot> Screener::slot_for(const std::string& session_id) {
  std::lock_guard lock(slots_mu_);
  auto& slot = slots_[session_id];
  if (!slot) slot = std::make_shared<Slot>();
  return slot;
}

Session& Screener::loaded(Slot& slot, const std::string& session_id) {
  if (!slot.session) {
    if (!store_->exists(session_id)) throw Error(Errc::kNotFound, "unknown session '" + session_id + "'");
    auto stored = store_->load(session_id);
    slot.session = replay(stored.header, stored.events);
  }
  return *slot.session;
}

void Screener::record(Session& session, EventKind kind, json payload) {
  SessionEvent ev{session.next_seq(), format_timestamp(clock_->wall_ms()), kind, std::move(payload)};
  Session next = session;
  next.apply(ev);
  store_->append(session.id(), ev);
  session = std::move(next);
}

Session Screener::create_session(const std::string& patient_ref, std::optional<std::string> session_id) {
  SessionHeader header;
  header.session_id = session_id ? *session_id : new_session_id();
  header.patient_ref = patient_ref;
  header.eyes = cfg_.eyes;
  header.max_attempts = cfg_.quality.max_attempts;
  header.created_at = format_timestamp(clock_->wall_ms());
  store_->create(header);
  auto slot = slot_for(header.session_id);
  std::lock_guard lock(slot->mu);
  slot->session = Session(header);
  slot->original.clear();
  slot->working.clear();
  return *slot->session;
}

PixelGrid to_working_resolution(const PixelGrid& image, int longest_side) {
  const int longest = std::max(image.width(), image.height());
  if (longest <= longest_side) return image;
  const double s = static_cast<double>(longest_side) / longest;
  const int w = std::max(1, static_cast<int>(std::lround(image.width() * s)));
  const int h = std::max(1, static_cast<int>(std::lround(image.height() * s)));
  return imaging::resize(image, w, h);
}

PixelGrid Screener::to_working(const PixelGrid& image) const {
  return to_working_resolution(image, cfg_.working_resolution);
}

void Screener::ensure_images(Slot& slot, const Session& session, Eye eye) {
  if (slot.working.count(eye)) return;
  const auto& assets = session.eye(eye).capture_assets;
  if (assets.empty()) throw Error(Errc::kInvalidState, "no capture stored for this eye");
  const auto bytes = store_->get_asset(session.id(), assets.back());
  auto original = imaging::decode(bytes);
  slot.working.insert_or_assign(eye, to_working(original));
  slot.original.insert_or_assign(eye, std::move(original));
}

namespace {

json failure_json(const std::exception& e, const std::string& stage) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return json{{"stage", err->stage().empty() ? stage : err->stage()},
                {"code", errc_name(err->code())},
                {"message", err->what()}};
  }
  return json{{"stage", stage}, {"code", "internal-error"}, {"message", e.what()}};
}

}  // namespace

CaptureOutcome Screener::submit_capture(const std::string& session_id, Eye eye, const imaging::Bytes& image_bytes) {
  auto slot = slot_for(session_id);
  std::lock_guard lock(slot->mu);
  Session& s = loaded(*slot, session_id);
  if (!s.has_eye(eye)) {
    throw Error(Errc::kInvalidArgument, std::string(eye_name(eye)) + " eye is not part of this session");
  }
  if (!s.can_capture(eye)) {
    throw Error(Errc::kInvalidState, "capture for the " + std::string(eye_name(eye)) + " eye not allowed in state " +
                                         std::string(state_name(s.state())));
  }
  const auto format = imaging::sniff_format(image_bytes);
  if (!format) throw Error(Errc::kDecodeError, "unrecognized image format");
  PixelGrid original = imaging::decode(image_bytes, *format);
  PixelGrid working = to_working(original);

  const int attempt = s.eye(eye).attempts + 1;
  const std::string asset = "capture-" + std::string(eye_name(eye)) + "-" + std::to_string(attempt) +
                            (*format == imaging::ImageFormat::kPng ? ".png" : ".jpg");
  store_->put_asset(session_id, asset, image_bytes);
  record(s, EventKind::kCaptureSubmitted,
         {{"eye", eye_name(eye)},
          {"attempt", attempt},
          {"asset", asset},
          {"width", original.width()},
          {"height", original.height()}});

  stages::QualityConfig qcfg = cfg_.quality;
  qcfg.max_attempts = s.header().max_attempts;
  stages::QualityVerdict verdict;
  json error = nullptr;
  const double t0 = clock_->monotonic_ms();
  try {
    verdict = stages::assess_quality(working, *backends_.quality, qcfg, attempt);
  } catch (const std::exception& e) {
    verdict = stages::QualityVerdict{false, 0.0, {"stage-failed"}, attempt};
    error = failure_json(e, "quality");
  }
  const double ms = clock_->monotonic_ms() - t0;
  json payload = to_json(verdict);
  payload["eye"] = eye_name(eye);
  payload["ms"] = ms;
  payload["error"] = error;
  record(s, EventKind::kQualityAssessed, std::move(payload));

  CaptureOutcome out{NextAction::kEyeAccepted, verdict};
  switch (stages::recapture_decision(verdict, qcfg)) {
    case stages::RecaptureAction::kProceed:
      slot->original.insert_or_assign(eye, std::move(original));
      slot->working.insert_or_assign(eye, std::move(working));
      out.action = s.state() == SessionState::kScreening ? NextAction::kSessionReadyToScreen : NextAction::kEyeAccepted;
      break;
    case stages::RecaptureAction::kPromptRecapture:
      record(s, EventKind::kRecapturePrompted, {{"eye", eye_name(eye)}, {"attempt", attempt}, {"reasons", verdict.reasons}});
      out.action = NextAction::kPromptRecapture;
      break;
    case stages::RecaptureAction::kAbandonUngradable:
      record(s, EventKind::kAbandoned,
             {{"eye", eye_name(eye)}, {"attempt", attempt}, {"reason", "ungradable-after-retries"}});
      generate_report(s);
      out.action = NextAction::kSessionUngradable;
      break;
  }
  return out;
}

void Screener::generate_report(Session& s) {
  auto report = build_report(s, cfg_.operating_point, format_timestamp(clock_->wall_ms()));
  const auto text = report.dump(2) + "\n";
  store_->put_asset(s.id(), "report.json", imaging::Bytes(text.begin(), text.end()));
  record(s, EventKind::kReportGenerated, {{"report", std::move(report)}});
}

json Screener::run_screening(const std::string& session_id) {
  auto slot = slot_for(session_id);
  std::lock_guard lock(slot->mu);
  Session& s = loaded(*slot, session_id);
  if (s.state() != SessionState::kScreening) {
    throw Error(Errc::kInvalidState, "session not ready to screen (state " + std::string(state_name(s.state())) + ")");
  }
  const auto& op = cfg_.operating_point;
  // record() replaces s, so iterate over a copy.
  const std::vector<Eye> eyes = s.header().eyes;
  for (const Eye eye : eyes) {
    const auto name = std::string(eye_name(eye));
    std::optional<stages::PviResult> pvi;
    {
      json payload{{"eye", name}, {"threshold", op.threshold}, {"score", nullptr}, {"decision", nullptr},
                   {"error", nullptr}};
      const double t0 = clock_->monotonic_ms();
      try {
        ensure_images(*slot, s, eye);
        pvi = stages::detect_pvi(slot->working.at(eye), *backends_.pvi, op);
        payload["score"] = pvi->score;
        payload["decision"] = pvi->decision;
      } catch (const std::exception& e) {
        payload["error"] = failure_json(e, "pvi");
      }
      payload["ms"] = clock_->monotonic_ms() - t0;
      record(s, EventKind::kPviAssessed, std::move(payload));
    }
    if (!pvi || !pvi->decision) continue;

    const auto& working = slot->working.at(eye);
    {
      json payload{{"eye", name}, {"error", nullptr}};
      const double t0 = clock_->monotonic_ms();
      try {
        payload["diagnosis"] = to_json(stages::diagnose(working, *backends_.edd, cfg_.diagnosis, pvi));
      } catch (const std::exception& e) {
        payload["error"] = failure_json(e, "edd");
      }
      payload["ms"] = clock_->monotonic_ms() - t0;
      record(s, EventKind::kDiagnosed, std::move(payload));
    }
    {
      json payload{{"eye", name}, {"error", nullptr}};
      const double t0 = clock_->monotonic_ms();
      try {
        const auto vis =
            stages::visualize_lesions(working, *backends_.vlr, cfg_.lesions, pvi, &slot->original.at(eye));
        const std::string overlay_name = "overlay-" + name + ".png";
        const std::string mask_name = "mask-" + name + ".png";
        store_->put_asset(s.id(), overlay_name, imaging::encode_png(vis.overlay));
        store_->put_asset(s.id(), mask_name, imaging::encode_png(vis.refined));
        json comps = json::array();
        for (const auto& c : vis.components) {
          comps.push_back({{"area", c.area}, {"bbox", {c.bbox.x0, c.bbox.y0, c.bbox.x1, c.bbox.y1}}});
        }
        payload["components"] = comps;
        payload["overlay"] = overlay_name;
        payload["mask"] = mask_name;
      } catch (const std::exception& e) {
        payload["error"] = failure_json(e, "vlr");
      }
      payload["ms"] = clock_->monotonic_ms() - t0;
      record(s, EventKind::kLesionsVisualized, std::move(payload));
    }
  }
  generate_report(s);
  return *s.report();
}

ReferralRecord Screener::issue_referral(const std::string& session_id, std::optional<std::string> destination) {
  auto slot = slot_for(session_id);
  std::lock_guard lock(slot->mu);
  Session& s = loaded(*slot, session_id);
  if (s.referral() || s.state() == SessionState::kReferred) {
    throw Error(Errc::kAlreadyReferred, "session '" + session_id + "' was already referred");
  }
  if ((s.state() != SessionState::kCompleted && s.state() != SessionState::kCompletedUngradable) || !s.report()) {
    throw Error(Errc::kInvalidState, "session has no completed report");
  }
  if (!s.referral_recommended()) throw Error(Errc::kNotEligible, "referral not recommended for this session");
  ReferralRecord rec{s.id(), format_timestamp(clock_->wall_ms()), s.referral_reason(),
                     destination.value_or(cfg_.referral_destination)};
  record(s, EventKind::kReferralIssued, to_json(rec));
  const auto letter = render_referral_letter(*s.report(), rec);
  store_->put_asset(s.id(), "referral-letter.txt", imaging::Bytes(letter.begin(), letter.end()));
  const auto rec_text = to_json(rec).dump(2) + "\n";
  store_->put_asset(s.id(), "referral.json", imaging::Bytes(rec_text.begin(), rec_text.end()));
  return rec;
}

Session Screener::session(const std::string& session_id) {
  auto slot = slot_for(session_id);
  std::lock_guard lock(slot->mu);
  return loaded(*slot, session_id);
}

imaging::Bytes Screener::asset(const std::string& session_id, const std::string& name) {
  if (!store_->exists(session_id)) throw Error(Errc::kNotFound, "unknown session '" + session_id + "'");
  return store_->get_asset(session_id, name);
}

void Screener::forget(const std::string& session_id) {
  {
    std::lock_guard lock(slots_mu_);
    slots_.erase(session_id);
  }
  store_->erase(session_id);
}

}  // namespace retscreen::pipeline
