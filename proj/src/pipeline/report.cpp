#include "retscreen/pipeline/report.hpp"

#include <cstdio>
#include <sstream>

#include "retscreen/stages/pvi.hpp"

namespace retscreen::pipeline {

using nlohmann::json;

namespace {

std::string eye_status(const EyeSlot& s) {
  if (s.status == EyeStatus::kAbandoned) return "ungradable";
  if (s.stage_failed()) return "stage-failed";
  if (s.status == EyeStatus::kAccepted && s.pvi_done) return "screened";
  return "not-screened";
}

json eye_report(const EyeSlot& s) {
  json e;
  e["status"] = eye_status(s);
  json verdicts = json::array();
  for (const auto& v : s.verdicts) verdicts.push_back(to_json(v));
  e["quality"] = verdicts;
  e["attempts"] = s.attempts;
  e["captures"] = s.capture_assets;
  e["gradable"] = s.status == EyeStatus::kAccepted;
  json failures = json::array();
  for (const auto& f : s.failures) failures.push_back(to_json(f));
  e["stage_failures"] = failures;

  if (s.pvi_done && s.pvi_score) {
    e["pvi"] = {{"score", stages::report_score(*s.pvi_score)},
                {"decision", *s.pvi_decision},
                {"threshold", s.pvi_threshold}};
  } else {
    e["pvi"] = nullptr;
  }
  if (s.pvi_decision.value_or(false)) {
    if (s.diagnosis) {
      auto d = to_json(*s.diagnosis);
      if (s.diagnosis->positives.empty()) d["note"] = "no specific category; see Others score";
      e["diagnosis"] = d;
    } else {
      e["diagnosis"] = {{"stage_failed", true}};
    }
    if (s.lesions) {
      json comps = json::array();
      for (const auto& c : s.lesions->components) {
        comps.push_back({{"area", c.area}, {"bbox", {c.bbox.x0, c.bbox.y0, c.bbox.x1, c.bbox.y1}}});
      }
      e["lesions"] = {{"components", comps}, {"overlay", s.lesions->overlay_asset}, {"mask", s.lesions->mask_asset}};
    } else {
      e["lesions"] = {{"stage_failed", true}};
    }
  }
  return e;
}

}  // namespace

json build_report(const Session& session, const stages::OperatingPoint& op, const std::string& generated_at) {
  json r;
  r["session_id"] = session.id();
  r["patient_ref"] = session.header().patient_ref;
  r["generated_at"] = generated_at;
  const bool ungradable = session.state() == SessionState::kCompletedUngradable;
  r["status"] = ungradable ? "ungradable" : "completed";
  const bool refer = session.referral_recommended();
  r["referral_recommended"] = refer;
  r["referral_reason"] = refer ? json(session.referral_reason()) : json(nullptr);

  bool manual_review = false;
  json eyes = json::object();
  for (const auto& [eye, slot] : session.eyes()) {
    eyes[std::string(eye_name(eye))] = eye_report(slot);
    manual_review = manual_review || slot.stage_failed() || slot.status == EyeStatus::kAbandoned;
  }
  r["eyes"] = eyes;
  r["manual_review"] = manual_review;

  json notes = json::array();
  if (ungradable) notes.push_back("ungradable after repeated capture; refer for in-person check");
  for (const auto& [eye, slot] : session.eyes()) {
    if (slot.stage_failed()) {
      notes.push_back(std::string(eye_name(eye)) + " eye: automated screening failed; manual review required");
    }
  }
  if (!refer) notes.push_back("PVI negative; quality and PVI scores reported for the record");
  r["notes"] = notes;

  r["operating_point"] = stages::to_json(op);
  json timings = json::object();
  double total = 0.0;
  for (const auto& [stage, ms] : session.timings()) {
    timings[stage] = ms;
    total += ms;
  }
  timings["total"] = total;
  r["stage_timings_ms"] = timings;
  return r;
}

std::string render_referral_letter(const json& report, const ReferralRecord& referral) {
  std::ostringstream out;
  out << "REFERRAL FOR FURTHER EYE EXAMINATION\n\n";
  out << "To: " << referral.destination << "\n";
  out << "Issued: " << referral.issued_at << "\n";
  out << "Session: " << referral.session_id << "\n";
  out << "Patient reference: " << report.value("patient_ref", std::string()) << "\n";
  out << "Reason: "
      << (referral.reason == "pvi-positive" ? "suspected pathology visual impairment"
                                            : "images could not be graded; in-person check required")
      << "\n\n";
  for (const auto& [eye, e] : report.at("eyes").items()) {
    out << "Eye: " << eye << " (" << e.value("status", std::string()) << ")\n";
    if (!e["quality"].empty()) {
      const auto& last = e["quality"].back();
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.3f", last.at("score").get<double>());
      out << "  Image quality score: " << buf << " after " << e.value("attempts", 0) << " capture(s)\n";
    }
    if (e.contains("pvi") && !e["pvi"].is_null()) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6f", e["pvi"]["score"].get<double>());
      out << "  PVI score: " << buf << " -> " << (e["pvi"]["decision"].get<bool>() ? "positive" : "negative") << "\n";
    }
    if (e.contains("diagnosis") && e["diagnosis"].contains("positives")) {
      const auto& pos = e["diagnosis"]["positives"];
      out << "  Suspected categories: ";
      if (pos.empty()) {
        out << "none specific (see Others score)";
      } else {
        for (std::size_t i = 0; i < pos.size(); ++i) out << (i ? ", " : "") << pos[i].get<std::string>();
      }
      out << "\n";
    }
    if (e.contains("lesions") && e["lesions"].contains("components")) {
      out << "  Highlighted regions: " << e["lesions"]["components"].size() << " (see "
          << e["lesions"]["overlay"].get<std::string>() << ")\n";
    }
    if (e.value("status", std::string()) == "stage-failed") out << "  Automated screening incomplete: manual review\n";
  }
  out << "\nThis letter was generated by an automated screening aid and is not a diagnosis.\n";
  return out.str();
}

}  // namespace retscreen::pipeline
