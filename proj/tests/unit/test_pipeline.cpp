#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "retscreen/error.hpp"
#include "retscreen/pipeline/config.hpp"
#include "retscreen/pipeline/screener.hpp"
#include "retscreen/pipeline/store.hpp"
#include "support/fakes.hpp"

using namespace retscreen;
using namespace retscreen::pipeline;
using fakes::code_of;
using fakes::coded_capture;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

PipelineConfig test_config(int working = 64) {
  PipelineConfig cfg;
  cfg.working_resolution = working;
  cfg.operating_point.threshold = 0.5;
  cfg.operating_point.calibration_set_id = "unit";
  return cfg;
}

struct Rig {
  std::shared_ptr<fakes::ScriptedBackend> backend = fakes::coded_backend();
  std::shared_ptr<SessionStore> store;
  std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>();
  Screener screener;

  explicit Rig(std::shared_ptr<SessionStore> s = std::make_shared<MemoryStore>(), PipelineConfig cfg = test_config())
      : store(s), screener(cfg, StageBackends{backend, backend, backend, backend}, store, clock) {}
};

int count(const Session& s, EventKind k) {
  int n = 0;
  for (const auto& e : s.events()) n += e.kind == k;
  return n;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("rs-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("negative session: capture, screen, no referral") {
  Rig rig;
  const auto s0 = rig.screener.create_session("patient-1", "sess-neg");
  CHECK(s0.state() == SessionState::kAwaitingCapture);

  auto out = rig.screener.submit_capture("sess-neg", Eye::kLeft, coded_capture(0.9, 0.1));
  CHECK(out.action == NextAction::kEyeAccepted);
  CHECK(out.verdict.gradable);
  out = rig.screener.submit_capture("sess-neg", Eye::kRight, coded_capture(0.9, 0.2));
  CHECK(out.action == NextAction::kSessionReadyToScreen);
  CHECK(rig.screener.session("sess-neg").state() == SessionState::kScreening);

  const auto report = rig.screener.run_screening("sess-neg");
  const auto s = rig.screener.session("sess-neg");
  CHECK(s.state() == SessionState::kCompleted);
  CHECK(report["status"] == "completed");
  CHECK(report["referral_recommended"] == false);
  CHECK(report["referral_reason"].is_null());
  CHECK(report["eyes"]["left"]["status"] == "screened");
  CHECK(report["eyes"]["left"]["pvi"]["decision"] == false);
  CHECK_FALSE(report["eyes"]["left"].contains("diagnosis"));
  CHECK(count(s, EventKind::kDiagnosed) == 0);
  CHECK(count(s, EventKind::kLesionsVisualized) == 0);
  CHECK(rig.backend->calls["edd"] == 0);
  CHECK(rig.backend->calls["segment"] == 0);

  CHECK(code_of([&] { rig.screener.issue_referral("sess-neg"); }) == Errc::kNotEligible);
  CHECK(code_of([&] { rig.screener.run_screening("sess-neg"); }) == Errc::kInvalidState);
  CHECK(code_of([&] { rig.screener.submit_capture("sess-neg", Eye::kLeft, coded_capture(0.9, 0.1)); }) ==
        Errc::kInvalidState);
}

TEST_CASE("positive eye: diagnosis, lesions and referral") {
  Rig rig;
  rig.screener.create_session("p", "sess-pos");
  rig.screener.submit_capture("sess-pos", Eye::kLeft, coded_capture(0.9, 0.8, true));
  rig.screener.submit_capture("sess-pos", Eye::kRight, coded_capture(0.9, 0.1));
  const auto report = rig.screener.run_screening("sess-pos");
  CHECK(report["referral_recommended"] == true);
  CHECK(report["referral_reason"] == "pvi-positive");
  const auto& left = report["eyes"]["left"];
  CHECK(left["pvi"]["decision"] == true);
  CHECK(left["diagnosis"]["note"] == "no specific category; see Others score");
  REQUIRE(left["lesions"]["components"].size() == 1);
  CHECK(left["lesions"]["overlay"] == "overlay-left.png");
  CHECK_FALSE(report["eyes"]["right"].contains("diagnosis"));
  CHECK(rig.backend->calls["edd"] == 1);
  CHECK(rig.backend->calls["segment"] == 1);

  const auto overlay = imaging::decode(rig.screener.asset("sess-pos", "overlay-left.png"));
  CHECK(overlay.width() == 32);  // original capture resolution

  const auto rec = rig.screener.issue_referral("sess-pos", "regional clinic");
  CHECK(rec.reason == "pvi-positive");
  CHECK(rec.destination == "regional clinic");
  CHECK(rig.screener.session("sess-pos").state() == SessionState::kReferred);
  const auto letter = rig.screener.asset("sess-pos", "referral-letter.txt");
  CHECK(std::string(letter.begin(), letter.end()).find("regional clinic") != std::string::npos);
  CHECK(code_of([&] { rig.screener.issue_referral("sess-pos"); }) == Errc::kAlreadyReferred);
}

TEST_CASE("three ungradable captures abandon the session and allow referral") {
  Rig rig;
  rig.screener.create_session("p", "sess-ug");
  CHECK(rig.screener.submit_capture("sess-ug", Eye::kLeft, coded_capture(0.2, 0.1)).action ==
        NextAction::kPromptRecapture);
  CHECK(rig.screener.submit_capture("sess-ug", Eye::kLeft, coded_capture(0.3, 0.1)).action ==
        NextAction::kPromptRecapture);
  const auto last = rig.screener.submit_capture("sess-ug", Eye::kLeft, coded_capture(0.1, 0.1));
  CHECK(last.action == NextAction::kSessionUngradable);
  CHECK(last.verdict.attempt == 3);

  const auto s = rig.screener.session("sess-ug");
  CHECK(s.state() == SessionState::kCompletedUngradable);
  CHECK(count(s, EventKind::kQualityAssessed) == 3);
  CHECK(count(s, EventKind::kRecapturePrompted) == 2);
  CHECK(count(s, EventKind::kAbandoned) == 1);
  CHECK(count(s, EventKind::kPviAssessed) == 0);
  REQUIRE(s.report());
  CHECK((*s.report())["status"] == "ungradable");
  CHECK((*s.report())["referral_recommended"] == true);
  CHECK((*s.report())["referral_reason"] == "ungradable");
  CHECK((*s.report())["manual_review"] == true);
  CHECK((*s.report())["eyes"]["left"]["attempts"] == 3);

  CHECK(code_of([&] { rig.screener.submit_capture("sess-ug", Eye::kLeft, coded_capture(0.9, 0.1)); }) ==
        Errc::kInvalidState);
  CHECK(code_of([&] { rig.screener.submit_capture("sess-ug", Eye::kRight, coded_capture(0.9, 0.1)); }) ==
        Errc::kInvalidState);
  CHECK(rig.screener.issue_referral("sess-ug").reason == "ungradable");
}

TEST_CASE("recapture then accept") {
  Rig rig;
  rig.screener.create_session("p", "sess-re");
  rig.screener.submit_capture("sess-re", Eye::kRight, coded_capture(0.2, 0.1));
  CHECK(rig.screener.submit_capture("sess-re", Eye::kRight, coded_capture(0.8, 0.1)).action ==
        NextAction::kEyeAccepted);
  const auto s = rig.screener.session("sess-re");
  CHECK(s.eye(Eye::kRight).attempts == 2);
  CHECK(s.eye(Eye::kRight).status == EyeStatus::kAccepted);
  CHECK(s.eye(Eye::kRight).capture_assets == std::vector<std::string>{"capture-right-1.png", "capture-right-2.png"});
  CHECK(s.state() == SessionState::kAwaitingCapture);
  // An accepted eye takes no more captures.
  CHECK(code_of([&] { rig.screener.submit_capture("sess-re", Eye::kRight, coded_capture(0.8, 0.1)); }) ==
        Errc::kInvalidState);
}

TEST_CASE("stage failures are recorded, not thrown") {
  SUBCASE("edd") {
    Rig rig;
    rig.backend->fail["edd"] = Errc::kBackendTimeout;
    rig.screener.create_session("p", "sess-f");
    rig.screener.submit_capture("sess-f", Eye::kLeft, coded_capture(0.9, 0.9, true));
    rig.screener.submit_capture("sess-f", Eye::kRight, coded_capture(0.9, 0.1));
    const auto report = rig.screener.run_screening("sess-f");
    CHECK(report["manual_review"] == true);
    CHECK(report["eyes"]["left"]["status"] == "stage-failed");
    CHECK(report["eyes"]["left"]["diagnosis"]["stage_failed"] == true);
    CHECK(report["eyes"]["left"]["stage_failures"][0]["stage"] == "edd");
    CHECK(report["eyes"]["left"]["stage_failures"][0]["code"] == "backend-timeout");
    CHECK(report["eyes"]["left"]["lesions"]["components"].size() == 1);
    CHECK(report["referral_reason"] == "pvi-positive");
  }
  SUBCASE("pvi") {
    Rig rig;
    rig.backend->fail["pvi"] = Errc::kBackendUnavailable;
    rig.screener.create_session("p", "sess-f");
    rig.screener.submit_capture("sess-f", Eye::kLeft, coded_capture(0.9, 0.9, true));
    rig.screener.submit_capture("sess-f", Eye::kRight, coded_capture(0.9, 0.1));
    const auto report = rig.screener.run_screening("sess-f");
    CHECK(report["eyes"]["left"]["pvi"].is_null());
    CHECK(report["eyes"]["left"]["status"] == "stage-failed");
    CHECK(report["referral_recommended"] == true);
    CHECK(report["referral_reason"] == "ungradable");
    CHECK(rig.backend->calls["edd"] == 0);
    CHECK(rig.screener.session("sess-f").state() == SessionState::kCompleted);
  }
  SUBCASE("quality") {
    Rig rig;
    rig.backend->fail["quality"] = Errc::kBackendUnavailable;
    rig.screener.create_session("p", "sess-f");
    const auto out = rig.screener.submit_capture("sess-f", Eye::kLeft, coded_capture(0.9, 0.1));
    CHECK(out.action == NextAction::kPromptRecapture);
    CHECK(out.verdict.reasons == std::vector<std::string>{"stage-failed"});
    const auto ev = rig.screener.session("sess-f").events()[1];
    CHECK(ev.kind == EventKind::kQualityAssessed);
    CHECK(ev.payload["error"]["code"] == "backend-unavailable");
  }
}

TEST_CASE("request validation") {
  Rig rig;
  CHECK(code_of([&] { rig.screener.session("nope"); }) == Errc::kNotFound);
  CHECK(code_of([&] { rig.screener.submit_capture("nope", Eye::kLeft, coded_capture(0.9, 0.1)); }) ==
        Errc::kNotFound);
  rig.screener.create_session("p", "dup");
  CHECK(code_of([&] { rig.screener.create_session("p", "dup"); }) == Errc::kIdCollision);
  CHECK(code_of([&] { rig.screener.create_session("p", "../escape"); }) == Errc::kInvalidArgument);
  CHECK(code_of([&] { rig.screener.run_screening("dup"); }) == Errc::kInvalidState);
  CHECK(code_of([&] { rig.screener.issue_referral("dup"); }) == Errc::kInvalidState);
  const imaging::Bytes junk{'n', 'o', 't', ' ', 'a', 'n', ' ', 'i', 'm', 'a', 'g', 'e'};
  CHECK(code_of([&] { rig.screener.submit_capture("dup", Eye::kLeft, junk); }) == Errc::kDecodeError);
  CHECK(rig.screener.session("dup").events().empty());

  auto cfg = test_config();
  cfg.eyes = {Eye::kRight};
  Rig one(std::make_shared<MemoryStore>(), cfg);
  one.screener.create_session("p", "one");
  CHECK(code_of([&] { one.screener.submit_capture("one", Eye::kLeft, coded_capture(0.9, 0.1)); }) ==
        Errc::kInvalidArgument);
  CHECK(one.screener.submit_capture("one", Eye::kRight, coded_capture(0.9, 0.1)).action ==
        NextAction::kSessionReadyToScreen);
}

TEST_CASE("session apply rejects illegal transitions") {
  SessionHeader h{"s", "p", {Eye::kLeft, Eye::kRight}, 3, "2026-01-01T00:00:00.000Z"};
  Session s(h);
  auto ev = [&](EventKind k, json payload) { return SessionEvent{s.next_seq(), "t", k, std::move(payload)}; };
  CHECK(code_of([&] { s.apply(ev(EventKind::kPviAssessed, {{"eye", "left"}})); }) == Errc::kInvalidState);
  CHECK(code_of([&] { s.apply(ev(EventKind::kReferralIssued, {})); }) == Errc::kInvalidState);
  const auto before = s;
  try {
    s.apply(SessionEvent{1, "t", EventKind::kQualityAssessed,
                         {{"eye", "left"}, {"attempt", 1}, {"gradable", true}, {"score", 0.9}, {"reasons", json::array()}}});
    FAIL("accepted a verdict without a capture");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kInvalidState);
    CHECK(e.seq() == 1);
  }
  CHECK(s == before);
}

TEST_CASE("replay reproduces the live session") {
  Rig rig;
  rig.screener.create_session("p", "sess-rp");
  rig.screener.submit_capture("sess-rp", Eye::kLeft, coded_capture(0.1, 0.1));
  rig.screener.submit_capture("sess-rp", Eye::kLeft, coded_capture(0.9, 0.9, true));
  rig.screener.submit_capture("sess-rp", Eye::kRight, coded_capture(0.9, 0.1));
  rig.screener.run_screening("sess-rp");
  rig.screener.issue_referral("sess-rp");
  const auto live = rig.screener.session("sess-rp");
  const auto stored = rig.store->load("sess-rp");
  CHECK(replay(stored.header, stored.events) == live);

  for (const auto& e : stored.events) CHECK(parse_event(serialize_event(e)) == e);
  const auto line = serialize_event(stored.events.front());
  CHECK(line.find(R"({"kind":"CaptureSubmitted","payload":{)") == 0);

  SUBCASE("gap") {
    auto events = stored.events;
    events.erase(events.begin() + 3);
    try {
      replay(stored.header, events);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kCorruptLog);
      CHECK(e.seq() == 5);
    }
  }
  SUBCASE("reordered") {
    auto events = stored.events;
    std::swap(events[0].kind, events[1].kind);
    std::swap(events[0].payload, events[1].payload);
    try {
      replay(stored.header, events);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kCorruptLog);
      CHECK(e.seq() == 1);
    }
  }
  SUBCASE("empty") { CHECK(replay(stored.header, {}) == Session(stored.header)); }
  SUBCASE("garbage line") { CHECK(code_of([] { parse_event("{\"kind\":"); }) == Errc::kCorruptLog); }
}

TEST_CASE("manual clock makes logs byte-identical") {
  auto run = [] {
    Rig rig;
    rig.screener.create_session("p", "same");
    rig.screener.submit_capture("same", Eye::kLeft, coded_capture(0.9, 0.9, true));
    rig.screener.submit_capture("same", Eye::kRight, coded_capture(0.2, 0.1));
    rig.screener.submit_capture("same", Eye::kRight, coded_capture(0.9, 0.1));
    rig.screener.run_screening("same");
    std::string out;
    const auto s = rig.screener.session("same");
    for (const auto& e : s.events()) out += serialize_event(e) + "\n";
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("directory store persists sessions and assets") {
  TempDir dir("store");
  {
    Rig rig(std::make_shared<DirectoryStore>(dir.path));
    rig.screener.create_session("p", "disk-1");
    rig.screener.submit_capture("disk-1", Eye::kLeft, coded_capture(0.9, 0.9, true));
    rig.screener.submit_capture("disk-1", Eye::kRight, coded_capture(0.9, 0.1));
    rig.screener.run_screening("disk-1");
  }
  CHECK(fs::exists(dir.path / "index.tsv"));
  CHECK(fs::exists(dir.path / "disk-1" / "session.json"));
  CHECK(fs::exists(dir.path / "disk-1" / "events.ndjson"));
  CHECK(fs::exists(dir.path / "disk-1" / "report.json"));
  CHECK(fs::exists(dir.path / "disk-1" / "overlay-left.png"));

  Rig reopened(std::make_shared<DirectoryStore>(dir.path));
  const auto s = reopened.screener.session("disk-1");
  CHECK(s.state() == SessionState::kCompleted);
  CHECK(reopened.store->list() == std::vector<std::string>{"disk-1"});
  CHECK(read_event_log(dir.path / "disk-1" / "events.ndjson") == s.events());
  // Screening state survives a restart: the referral needs only the log.
  CHECK(reopened.screener.issue_referral("disk-1").reason == "pvi-positive");
  CHECK(code_of([&] { reopened.screener.create_session("p", "disk-1"); }) == Errc::kIdCollision);

  DirectoryStore raw(dir.path);
  CHECK(code_of([&] { raw.put_asset("disk-1", "../x", {1}); }) == Errc::kInvalidArgument);
  CHECK(code_of([&] { raw.put_asset("disk-1", ".hidden", {1}); }) == Errc::kInvalidArgument);
  CHECK(code_of([&] { raw.get_asset("disk-1", "missing.png"); }) == Errc::kNotFound);
  CHECK(code_of([&] { raw.append("ghost", SessionEvent{}); }) == Errc::kNotFound);
  CHECK(valid_asset_name("capture-left-1.png"));
  CHECK_FALSE(valid_asset_name("a/b"));
  CHECK_FALSE(valid_asset_name(""));

  std::ofstream(dir.path / "disk-1" / "events.ndjson", std::ios::app) << "{broken\n";
  DirectoryStore again(dir.path);
  CHECK(code_of([&] { again.load("disk-1"); }) == Errc::kCorruptLog);
}

TEST_CASE("config loading") {
  TempDir dir("cfg");
  std::ofstream(dir.path / "op.json") << R"({"threshold":0.4,"policy":"youden","target":null,)"
                                      << R"("achieved_sensitivity":0.9,"achieved_specificity":0.8,)"
                                      << R"("calibration_set_id":"abc"})";
  std::ofstream(dir.path / "good.json") << R"({"operating_point":"op.json","eyes":["right"],)"
                                        << R"("quality":{"threshold":0.55,"max_attempts":2},)"
                                        << R"("diagnosis":{"thresholds":{"DR":0.3}}})";
  const auto cfg = load_config(dir.path / "good.json");
  CHECK(cfg.operating_point.threshold == 0.4);
  CHECK(cfg.operating_point.calibration_set_id == "abc");
  CHECK(cfg.eyes == std::vector<Eye>{Eye::kRight});
  CHECK(cfg.quality.threshold == 0.55);
  CHECK(cfg.quality.max_attempts == 2);
  CHECK(cfg.diagnosis.threshold_for("DR") == 0.3);
  CHECK(cfg.diagnosis.threshold_for("AMD") == 0.5);

  const auto again = config_from_json(config_to_json(cfg), dir.path);
  CHECK(config_to_json(again) == config_to_json(cfg));

  std::ofstream(dir.path / "missing-op.json") << R"({"operating_point":"nowhere.json"})";
  try {
    load_config(dir.path / "missing-op.json");
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kConfigInvalid);
    CHECK(std::string(e.what()).find("nowhere.json") != std::string::npos);
  }
  std::ofstream(dir.path / "typo.json") << R"({"operating_point":"op.json","qualty":{}})";
  CHECK(code_of([&] { load_config(dir.path / "typo.json"); }) == Errc::kConfigInvalid);
  std::ofstream(dir.path / "ext.json") << R"({"operating_point":"op.json","backends":{"pvi":{"kind":"external"}}})";
  CHECK(code_of([&] { load_config(dir.path / "ext.json"); }) == Errc::kConfigInvalid);
  CHECK(code_of([&] { load_config(dir.path / "absent.json"); }) == Errc::kConfigInvalid);
}

TEST_CASE("working resolution only ever downscales") {
  const PixelGrid wide(1024, 768, 3);
  const auto down = to_working_resolution(wide, 512);
  CHECK(down.width() == 512);
  CHECK(down.height() == 384);
  const PixelGrid small(200, 100, 3);
  CHECK(to_working_resolution(small, 512) == small);
  CHECK(to_working_resolution(PixelGrid(512, 512, 1), 512).width() == 512);
}
