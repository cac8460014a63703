#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles/oracles.hpp"
#include "retscreen/backends/reference.hpp"
#include "retscreen/error.hpp"
#include "retscreen/harness/synth.hpp"
#include "retscreen/imaging/fov.hpp"
#include "retscreen/imaging/morphology.hpp"
#include "retscreen/imaging/transform.hpp"
#include "retscreen/stages/diagnosis.hpp"
#include "retscreen/stages/lesions.hpp"
#include "retscreen/stages/operating_point.hpp"
#include "retscreen/stages/pvi.hpp"
#include "retscreen/stages/quality.hpp"
#include "support/fakes.hpp"

using namespace retscreen;
using namespace retscreen::stages;
using fakes::code_of;
namespace fs = std::filesystem;

namespace {

std::vector<LabeledScore> make(std::initializer_list<double> pos, std::initializer_list<double> neg) {
  std::vector<LabeledScore> s;
  for (double p : pos) s.push_back({p, true});
  for (double n : neg) s.push_back({n, false});
  return s;
}

PixelGrid fundus(std::uint64_t seed, harness::Degradation d = harness::Degradation::kNone, int size = 256) {
  harness::FundusRecipe r;
  r.size = size;
  r.center_x = r.center_y = size / 2.0;
  r.radius = size * 0.445;
  r.seed = seed;
  r.degradation = d;
  return harness::render_fundus(r).image;
}

OperatingPoint op_at(double t) {
  OperatingPoint op;
  op.threshold = t;
  op.calibration_set_id = "test";
  return op;
}

}  // namespace

TEST_CASE("quality verdict follows the threshold") {
  fakes::ScriptedBackend b;
  QualityConfig cfg;
  const auto img = fundus(1);
  b.quality = [](const PixelGrid&) { return 0.5; };
  auto v = assess_quality(img, b, cfg, 1);
  CHECK(v.gradable);
  CHECK(v.reasons.empty());
  b.quality = [](const PixelGrid&) { return std::nextafter(0.5, 0.0); };
  v = assess_quality(img, b, cfg, 2);
  CHECK_FALSE(v.gradable);
  CHECK(v.attempt == 2);
  CHECK_FALSE(v.reasons.empty());
  CHECK(code_of([&] { assess_quality(img, b, cfg, 0); }) == Errc::kInvalidArgument);
}

TEST_CASE("quality reasons name the weak feature") {
  fakes::ScriptedBackend b;
  b.quality = [](const PixelGrid&) { return 0.1; };
  QualityConfig cfg;
  CHECK(assess_quality(PixelGrid(64, 64, 3), b, cfg, 1).reasons == std::vector<std::string>{"no-fov"});
  const auto blurred = assess_quality(fundus(2, harness::Degradation::kBlur), b, cfg, 1).reasons;
  CHECK(std::find(blurred.begin(), blurred.end(), "low-sharpness") != blurred.end());
  const auto dark = assess_quality(fundus(2, harness::Degradation::kDark), b, cfg, 1).reasons;
  CHECK(std::find(dark.begin(), dark.end(), "low-contrast") != dark.end());
}

TEST_CASE("quality backend errors carry the stage") {
  fakes::ScriptedBackend b;
  b.fail["quality"] = Errc::kBackendTimeout;
  try {
    assess_quality(fundus(1), b, {}, 1);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kBackendTimeout);
    CHECK(e.stage() == "quality");
  }
  fakes::ScriptedBackend bad;
  bad.quality = [](const PixelGrid&) { return 1.5; };
  CHECK(code_of([&] { assess_quality(fundus(1), bad, {}, 1); }) == Errc::kMalformedResponse);
}

TEST_CASE("reference quality separates clean from degraded frames") {
  backends::ReferenceBackend ref;
  QualityConfig cfg;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    CHECK(assess_quality(fundus(seed, harness::Degradation::kNone, 512), ref, cfg, 1).gradable);
    CHECK_FALSE(assess_quality(fundus(seed, harness::Degradation::kBlur, 512), ref, cfg, 1).gradable);
    CHECK_FALSE(assess_quality(fundus(seed, harness::Degradation::kDark, 512), ref, cfg, 1).gradable);
  }
}

TEST_CASE("recapture decision") {
  QualityConfig cfg;
  QualityVerdict v;
  v.gradable = true;
  v.attempt = 3;
  CHECK(recapture_decision(v, cfg) == RecaptureAction::kProceed);
  v.gradable = false;
  v.attempt = 1;
  CHECK(recapture_decision(v, cfg) == RecaptureAction::kPromptRecapture);
  v.attempt = 2;
  CHECK(recapture_decision(v, cfg) == RecaptureAction::kPromptRecapture);
  v.attempt = 3;
  CHECK(recapture_decision(v, cfg) == RecaptureAction::kAbandonUngradable);
  cfg.max_attempts = 1;
  v.attempt = 1;
  CHECK(recapture_decision(v, cfg) == RecaptureAction::kAbandonUngradable);
  CHECK(recapture_action_name(RecaptureAction::kPromptRecapture) == "prompt-recapture");
}

TEST_CASE("calibration: worked example") {
  const auto s = make({0.9, 0.8, 0.4}, {0.6, 0.3, 0.1});
  const auto op = calibrate_operating_point(s, Policy::kTargetSensitivity, 0.66);
  CHECK(op.threshold == 0.8);
  CHECK(op.achieved_sensitivity == doctest::Approx(2.0 / 3.0));
  CHECK(op.achieved_specificity == 1.0);
  CHECK_FALSE(op.target_unattained());

  const auto y = calibrate_operating_point(s, Policy::kYouden, std::nullopt);
  CHECK(y.threshold == 0.8);

  const auto sp = calibrate_operating_point(s, Policy::kTargetSpecificity, 0.6);
  // Most sensitive threshold with spec >= 0.6.
  CHECK(sp.threshold == 0.4);
  CHECK(sp.achieved_sensitivity == 1.0);
  CHECK(sp.achieved_specificity == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("calibration: separable and degenerate inputs") {
  const auto s = make({0.7, 0.8, 0.9}, {0.1, 0.2, 0.3});
  for (auto p : {Policy::kYouden, Policy::kTargetSensitivity, Policy::kTargetSpecificity}) {
    const auto op = calibrate_operating_point(s, p, p == Policy::kYouden ? std::nullopt : std::optional(0.95));
    CHECK(op.achieved_sensitivity == 1.0);
    CHECK(op.achieved_specificity == 1.0);
    CHECK(op.threshold == 0.7);
  }
  CHECK(code_of([] { calibrate_operating_point(make({0.3, 0.4}, {}), Policy::kYouden, {}); }) ==
        Errc::kAllOneClass);
  CHECK(code_of([&] { calibrate_operating_point(s, Policy::kTargetSensitivity, std::nullopt); }) ==
        Errc::kInvalidArgument);
  CHECK(code_of([&] { calibrate_operating_point(s, Policy::kTargetSensitivity, 1.5); }) == Errc::kInvalidArgument);

  // Sensitivity 1.0 is always attainable at the lowest score.
  const auto all = calibrate_operating_point(make({0.2}, {0.9}), Policy::kTargetSensitivity, 1.0);
  CHECK(all.achieved_sensitivity == 1.0);
  CHECK(all.threshold == 0.2);

  CHECK(above_all_threshold() > 1.0);
  const auto none = calibrate_operating_point(make({0.2}, {0.9}), Policy::kTargetSpecificity, 1.0);
  CHECK(none.threshold == above_all_threshold());
  CHECK(none.achieved_specificity == 1.0);
}

TEST_CASE("calibration agrees with the exhaustive sweep") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> target(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const auto s = oracle::random_samples(rng, 120);
    const double t = target(rng);
    for (int p = 0; p < 3; ++p) {
      const Policy policy = p == 0 ? Policy::kTargetSensitivity : p == 1 ? Policy::kTargetSpecificity : Policy::kYouden;
      const auto op = calibrate_operating_point(s, policy, p == 2 ? std::nullopt : std::optional(t));
      const auto want = oracle::exhaustive_choice(s, p, t);
      REQUIRE(op.threshold == want.point.threshold);
      CHECK(op.achieved_sensitivity == doctest::Approx(want.point.sens()));
      CHECK(op.achieved_specificity == doctest::Approx(want.point.spec()));
      CHECK(op.target_unattained() == want.unattained);
      if (p == 0 && !want.unattained) CHECK(op.achieved_sensitivity >= t);
    }
  }
}

TEST_CASE("calibration fingerprint and json") {
  const auto s = make({0.9, 0.8}, {0.1});
  const auto id = calibration_fingerprint(s);
  CHECK(id.rfind("sha256:", 0) == 0);
  CHECK(id.size() == 7 + 16);
  CHECK(calibration_fingerprint(make({0.9, 0.8}, {0.2})) != id);
  auto op = calibrate_operating_point(s, Policy::kTargetSensitivity, 0.9);
  CHECK(op.calibration_set_id == id);
  CHECK(operating_point_from_json(to_json(op)) == op);

  const auto dir = fs::temp_directory_path() / "rs-op-test";
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{\"threshold\": \"high\"}";
  try {
    load_operating_point(dir / "bad.json");
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kConfigInvalid);
    CHECK(std::string(e.what()).find("bad.json") != std::string::npos);
  }
  CHECK(code_of([&] { load_operating_point(dir / "missing.json"); }) == Errc::kConfigInvalid);
  fs::remove_all(dir);
}

TEST_CASE("pvi decision boundary") {
  const auto op = op_at(0.42);
  CHECK(pvi_decision(0.42, op).decision);
  CHECK_FALSE(pvi_decision(std::nextafter(0.42, 0.0), op).decision);
  fakes::ScriptedBackend b;
  b.pvi = [](const PixelGrid&) { return 0.7; };
  const auto r = detect_pvi(fundus(1), b, op);
  CHECK(r.decision);
  CHECK(r.score == 0.7);
  CHECK(r.operating_point == op);
  CHECK(report_score(0.1234567) == 0.123457);
  b.fail["pvi"] = Errc::kBackendUnavailable;
  try {
    detect_pvi(fundus(1), b, op);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.stage() == "pvi");
  }
}

TEST_CASE("pvi decisions are invariant under a monotone transform of scores and threshold") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double s = u(rng), t = u(rng);
    auto f = [](double x) { return x * x * x; };
    CHECK(pvi_decision(s, op_at(t)).decision == pvi_decision(f(s), op_at(f(t))).decision);
  }
}

TEST_CASE("diagnosis thresholds and positives") {
  DiagnosisConfig cfg;
  cfg.thresholds["DR"] = 0.3;
  backends::ScoreMap s;
  s.entries = {{"AMD", 0.5}, {"Cataract", 0.49}, {"DR", 0.3}, {"Glaucoma", 0.1}, {"MMD", 0.9}, {"Others", 0.0}};
  const auto d = diagnosis_from_scores(s, cfg);
  CHECK(d.positives == std::vector<std::string>{"AMD", "DR", "MMD"});
  CHECK(d.per_label_thresholds.at("DR") == 0.3);
  CHECK(d.per_label_thresholds.at("AMD") == 0.5);
  CHECK(d.probs == s.entries);
  s.entries.erase("Others");
  CHECK(code_of([&] { diagnosis_from_scores(s, cfg); }) == Errc::kMalformedResponse);
}

TEST_CASE("diagnosis and lesions require a positive gate") {
  fakes::ScriptedBackend b;
  const auto img = fundus(1);
  const auto negative = pvi_decision(0.1, op_at(0.5));
  for (const auto& gate : {std::optional<PviResult>{}, std::optional<PviResult>{negative}}) {
    try {
      diagnose(img, b, {}, gate);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kNotGated);
      CHECK(e.stage() == "edd");
    }
    try {
      visualize_lesions(img, b, {}, gate);
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::kNotGated);
      CHECK(e.stage() == "vlr");
    }
  }
  CHECK(b.calls["edd"] == 0);
  CHECK(b.calls["segment"] == 0);
  const auto positive = pvi_decision(0.9, op_at(0.5));
  CHECK_NOTHROW(diagnose(img, b, {}, positive));
  CHECK(b.calls["edd"] == 1);
}

TEST_CASE("lesion refinement: worked example") {
  // 40x40 frame, FOV everything; one 9x9 block and one isolated pixel.
  backends::ProbabilityMask raw{40, 40, std::vector<float>(1600, 0.0f)};
  for (int y = 10; y < 19; ++y)
    for (int x = 10; x < 19; ++x) raw.probs[static_cast<std::size_t>(y * 40 + x)] = 0.8f;
  raw.probs[30 * 40 + 30] = 0.99f;
  const BinaryMask fov(40, 40, true);
  LesionConfig cfg;
  const auto refined = refine_lesion_mask(raw, fov, cfg);
  CHECK_FALSE(refined.at(30, 30));
  CHECK(refined.at(14, 14));
  // The opening rounds the square's corners; brute force agrees.
  const auto expected = oracle::naive_dilate(oracle::naive_erode(raw.binarize(0.5), 2), 2);
  CHECK(refined == expected);

  // Half the FOV is larger than the whole block.
  cfg.min_area_fraction = 0.5;
  CHECK(refine_lesion_mask(raw, fov, cfg).count() == 0);

  // Outside the FOV nothing survives.
  CHECK(refine_lesion_mask(raw, BinaryMask(40, 40, false), LesionConfig{}).count() == 0);
}

TEST_CASE("lesion refinement is idempotent on its own output") {
  std::mt19937_64 rng(12);
  LesionConfig cfg;
  for (int i = 0; i < 50; ++i) {
    const auto m = oracle::random_mask(rng, 64);
    backends::ProbabilityMask raw{m.width(), m.height(), {}};
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x) raw.probs.push_back(m.at(x, y) ? 1.0f : 0.0f);
    const BinaryMask fov(m.width(), m.height(), true);
    const auto once = refine_lesion_mask(raw, fov, cfg);
    backends::ProbabilityMask again{m.width(), m.height(), {}};
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x) again.probs.push_back(once.at(x, y) ? 1.0f : 0.0f);
    CHECK(refine_lesion_mask(again, fov, cfg) == once);
  }
}

TEST_CASE("lesion visualization output") {
  harness::FundusRecipe r;
  r.size = 256;
  r.center_x = r.center_y = 128.0;
  r.radius = 114.0;
  r.seed = 3;
  r.lesions = {{90, 100, 5, 0.5, true}};
  const auto synth = harness::render_fundus(r);
  backends::ReferenceBackend ref;
  const auto positive = pvi_decision(0.9, op_at(0.5));
  const auto original = imaging::resize(synth.image, 512, 512);
  const auto viz = visualize_lesions(synth.image, ref, {}, positive, &original);
  CHECK(viz.overlay.width() == 512);
  CHECK(viz.overlay.height() == 512);
  CHECK(viz.refined.width() == 256);
  REQUIRE_FALSE(viz.components.empty());
  std::size_t total = 0;
  for (const auto& c : viz.components) total += c.area;
  CHECK(total == viz.refined.count());
  CHECK(oracle::naive_component_count(viz.refined) == static_cast<int>(viz.components.size()));
  const auto& b = viz.components.front().bbox;
  CHECK(b.x0 <= 90);
  CHECK(b.x1 >= 90);
}
