// retscreen: command-line entry points for screening, calibration, corpus
// generation, benchmarking, serving and log replay.

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include <json.hpp>

#include "retscreen/backends/reference.hpp"
#include "retscreen/backends/server.hpp"
#include "retscreen/error.hpp"
#include "retscreen/harness/bench.hpp"
#include "retscreen/harness/service.hpp"
#include "retscreen/harness/synth.hpp"
#include "retscreen/imaging/codec.hpp"
#include "retscreen/imaging/transform.hpp"
#include "retscreen/pipeline/config.hpp"
#include "retscreen/pipeline/screener.hpp"
#include "retscreen/pipeline/store.hpp"
#include "retscreen/stages/operating_point.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace retscreen;

namespace {

imaging::Bytes read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot read " + path.string());
  return imaging::Bytes(std::istreambuf_iterator<char>(in), {});
}

struct ImageSet {
  std::string id;
  std::map<pipeline::Eye, fs::path> eyes;
};

// Files named <stem>_left.* / <stem>_right.* form one two-eye set; any other
// image is a one-eye (left) set of its own.
std::vector<ImageSet> group_images(const fs::path& dir) {
  fs::path images = fs::is_directory(dir / "images") ? dir / "images" : dir;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(images)) {
    const auto ext = e.path().extension().string();
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, ImageSet> sets;
  for (const auto& f : files) {
    std::string stem = f.stem().string();
    auto eye = pipeline::Eye::kLeft;
    for (auto [suffix, e] : {std::pair{"_left", pipeline::Eye::kLeft}, std::pair{"_right", pipeline::Eye::kRight}}) {
      const std::string s = suffix;
      if (stem.size() > s.size() && stem.compare(stem.size() - s.size(), s.size(), s) == 0) {
        stem.resize(stem.size() - s.size());
        eye = e;
      }
    }
    auto& set = sets[stem];
    set.id = stem;
    set.eyes[eye] = f;
  }
  std::vector<ImageSet> out;
  for (auto& [k, v] : sets) out.push_back(std::move(v));
  return out;
}

int cmd_screen(const fs::path& in_dir, const fs::path& config_path, const fs::path& out_dir) {
  const auto cfg = pipeline::load_config(config_path);
  const fs::path store_root = out_dir.empty() ? cfg.store_root.value_or(fs::path("sessions")) : out_dir;
  auto store = std::make_shared<pipeline::DirectoryStore>(store_root);
  auto stage_backends = pipeline::make_stage_backends(cfg);
  std::map<std::vector<pipeline::Eye>, std::unique_ptr<pipeline::Screener>> screeners;

  std::size_t screened = 0, referred = 0, ungradable = 0;
  for (const auto& set : group_images(in_dir)) {
    std::vector<pipeline::Eye> eyes;
    for (const auto& [e, p] : set.eyes) eyes.push_back(e);
    auto& screener = screeners[eyes];
    if (!screener) {
      auto c = cfg;
      c.eyes = eyes;
      screener = std::make_unique<pipeline::Screener>(c, stage_backends, store);
    }
    screener->create_session(set.id, set.id);
    bool ready = false;
    bool abandoned = false;
    for (const auto& [eye, path] : set.eyes) {
      const auto bytes = read_bytes(path);
      // Batch mode has one capture per eye: resubmit it until the attempt
      // budget is spent, as an operator without a better frame would.
      for (;;) {
        const auto out = screener->submit_capture(set.id, eye, bytes);
        if (out.action == pipeline::NextAction::kPromptRecapture) continue;
        ready = out.action == pipeline::NextAction::kSessionReadyToScreen;
        abandoned = out.action == pipeline::NextAction::kSessionUngradable;
        break;
      }
      if (abandoned) break;
    }
    json report;
    if (ready) {
      report = screener->run_screening(set.id);
    } else {
      report = screener->session(set.id).report().value_or(json::object());
    }
    ++screened;
    if (report.value("referral_recommended", false)) ++referred;
    if (abandoned) ++ungradable;
  }
  std::cout << json{{"sessions", screened}, {"referral_recommended", referred}, {"ungradable", ungradable},
                    {"store", store_root.string()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_calibrate(const fs::path& csv, const std::string& policy, std::optional<double> target,
                  const std::string& set_id) {
  std::ifstream in(csv);
  if (!in) throw Error(Errc::kIoError, "cannot read " + csv.string());
  const auto samples = read_scores_csv(in);
  const auto op = stages::calibrate_operating_point(samples, stages::parse_policy(policy), target, set_id);
  std::cout << stages::to_json(op).dump(2) << "\n";
  return 0;
}

int cmd_score(const fs::path& corpus, const std::string& task_name, int working_resolution) {
  const auto task = backends::parse_task(task_name);
  backends::ReferenceBackend ref;
  std::vector<LabeledScore> samples;
  for (const auto& row : harness::read_truth(corpus)) {
    if (task != backends::Task::kQuality && !row.gradable) continue;
    const auto image =
        pipeline::to_working_resolution(imaging::decode(read_bytes(corpus / row.file)), working_resolution);
    const auto scores = ref.classify(image, task);
    const bool label = task == backends::Task::kQuality ? row.gradable : row.pvi;
    const double score = task == backends::Task::kQuality ? scores.at(backends::kGradableLabel)
                         : task == backends::Task::kPvi   ? scores.at(backends::kPviLabel)
                                                          : throw Error(Errc::kInvalidArgument, "score supports quality and pvi");
    samples.push_back({score, label});
  }
  write_scores_csv(std::cout, samples);
  return 0;
}

int cmd_bench(const fs::path& corpus, const fs::path& config_path, std::size_t min_images) {
  pipeline::PipelineConfig cfg;
  if (!config_path.empty()) {
    cfg = pipeline::load_config(config_path);
  } else {
    cfg.operating_point.calibration_set_id = "uncalibrated-default";
  }
  std::cout << harness::to_json(harness::bench_run(corpus, cfg, min_images)).dump(2) << "\n";
  return 0;
}

harness::HttpService* g_service = nullptr;
backends::BackendServer* g_backend = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
  if (g_backend) g_backend->stop();
}

int cmd_serve(const fs::path& config_path, const std::string& host, int port) {
  const auto cfg = pipeline::load_config(config_path);
  std::shared_ptr<pipeline::SessionStore> store;
  if (cfg.store_root) {
    store = std::make_shared<pipeline::DirectoryStore>(*cfg.store_root);
  } else {
    store = std::make_shared<pipeline::MemoryStore>();
  }
  harness::HttpService service(std::make_shared<pipeline::Screener>(cfg, store));
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "serving on " << host << ":" << port << "\n";
  service.run(host, port);
  g_service = nullptr;
  return 0;
}

int cmd_backend(const std::string& listen, const std::vector<std::string>& model_ids) {
  std::map<std::string, std::shared_ptr<backends::Backend>> registry;
  for (const auto& id : model_ids) {
    backends::BackendDescriptor d;
    d.model_id = id;
    registry[id] = std::make_shared<backends::ReferenceBackend>(d);
  }
  backends::BackendServer server(registry);
  const auto ep = server.start(listen);
  g_backend = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "backend listening on " << ep.to_string() << "\n";
  sigset_t mask;
  sigemptyset(&mask);
  sigaddset(&mask, SIGINT);
  sigaddset(&mask, SIGTERM);
  int sig = 0;
  pthread_sigmask(SIG_BLOCK, &mask, nullptr);
  sigwait(&mask, &sig);
  server.stop();
  g_backend = nullptr;
  return 0;
}

int cmd_replay(const fs::path& session_dir) {
  std::ifstream in(session_dir / "session.json");
  if (!in) throw Error(Errc::kIoError, "cannot read " + (session_dir / "session.json").string());
  const auto header = pipeline::header_from_json(json::parse(in));
  const auto events = pipeline::read_event_log(session_dir / "events.ndjson");
  const auto s = pipeline::replay(header, events);
  json eyes = json::object();
  for (const auto& [eye, slot] : s.eyes()) {
    eyes[std::string(pipeline::eye_name(eye))] = {{"attempts", slot.attempts},
                                                  {"pvi_decision", slot.pvi_decision ? json(*slot.pvi_decision) : json()},
                                                  {"stage_failed", slot.stage_failed()}};
  }
  std::cout << json{{"session_id", s.id()},
                    {"state", pipeline::state_name(s.state())},
                    {"events", s.events().size()},
                    {"referral_recommended", s.referral_recommended()},
                    {"eyes", eyes}}
                   .dump(2)
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Community fundus screening: quality gate, PVI triage, diagnosis and lesion overlays"};
  app.require_subcommand(1);

  fs::path screen_in, screen_cfg, screen_out;
  auto* screen = app.add_subcommand("screen", "Screen every image set in a directory; writes session reports");
  screen->add_option("--in", screen_in, "Image directory (or corpus with images/)")->required();
  screen->add_option("--config", screen_cfg, "Pipeline config JSON")->required();
  screen->add_option("--out", screen_out, "Session store directory (default: config store or ./sessions)");

  fs::path cal_csv;
  std::string cal_policy = "youden";
  std::optional<double> cal_target;
  std::string cal_id;
  auto* calibrate = app.add_subcommand("calibrate", "Pick an operating point from a score,label CSV");
  calibrate->add_option("scores", cal_csv, "CSV with header score,label")->required();
  calibrate->add_option("--policy", cal_policy, "target-sensitivity | target-specificity | youden")
      ->check(CLI::IsMember({"target-sensitivity", "target-specificity", "youden"}));
  calibrate->add_option("--target", cal_target, "Target rate in [0,1]")->check(CLI::Range(0.0, 1.0));
  calibrate->add_option("--id", cal_id, "Calibration set id (default: content fingerprint)");

  harness::SynthSpec spec;
  fs::path synth_out;
  bool no_bright = false, no_dark = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic fundus corpus");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--count", spec.count, "Number of images");
  synth->add_option("--seed", spec.seed, "Corpus seed");
  synth->add_option("--prevalence", spec.prevalence, "Fraction of PVI-positive images");
  synth->add_option("--salt", spec.salt_fraction, "Salt-noise pixel fraction");
  synth->add_option("--blur-radius", spec.blur_radius, "Box radius for degraded frames");
  synth->add_option("--ungradable", spec.fraction_ungradable, "Fraction of degraded frames");
  synth->add_option("--size", spec.size, "Image side in pixels");
  synth->add_flag("--no-bright", no_bright, "Disable bright (drusen-like) lesions");
  synth->add_flag("--no-dark", no_dark, "Disable dark (hemorrhage-like) lesions");

  fs::path score_corpus;
  std::string score_task = "pvi";
  int score_res = 512;
  auto* score = app.add_subcommand("score", "Reference scores vs corpus truth as score,label CSV");
  score->add_option("--corpus", score_corpus, "Corpus directory")->required();
  score->add_option("--task", score_task, "quality | pvi")->check(CLI::IsMember({"quality", "pvi"}));
  score->add_option("--working-resolution", score_res, "Cap on the longest side; larger images are downscaled");

  fs::path bench_corpus, bench_cfg;
  std::size_t bench_min = 50;
  auto* bench = app.add_subcommand("bench", "Throughput, latency percentiles and peak memory");
  bench->add_option("--corpus", bench_corpus, "Corpus directory")->required();
  bench->add_option("--config", bench_cfg, "Pipeline config JSON (default: reference backends)");
  bench->add_option("--min-images", bench_min, "Minimum corpus size");

  fs::path serve_cfg;
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP service for the operator console");
  serve->add_option("--config", serve_cfg, "Pipeline config JSON")->required();
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_option("--port", serve_port, "Bind port")->check(CLI::Range(0, 65535));

  std::string backend_listen;
  std::vector<std::string> backend_models = {"reference-v1"};
  auto* backend = app.add_subcommand("backend", "Host reference models over the backend socket protocol");
  backend->add_option("--listen", backend_listen, "unix:/path or tcp:host:port")->required();
  backend->add_option("--model-id", backend_models, "Model ids to register");

  fs::path replay_dir;
  auto* replay = app.add_subcommand("replay", "Rebuild a session from its event log");
  replay->add_option("session_dir", replay_dir, "Directory holding session.json and events.ndjson")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    if (*screen) return cmd_screen(screen_in, screen_cfg, screen_out);
    if (*calibrate) {
      if (cal_policy != "youden" && !cal_target) {
        std::cerr << "--target is required for " << cal_policy << "\n" << calibrate->help();
        return 2;
      }
      return cmd_calibrate(cal_csv, cal_policy, cal_target, cal_id);
    }
    if (*synth) {
      spec.bright_lesions = !no_bright;
      spec.dark_lesions = !no_dark;
      const auto rows = harness::synth_generate(spec, synth_out);
      std::cout << json{{"images", rows.size()}, {"out", synth_out.string()}}.dump() << "\n";
      return 0;
    }
    if (*score) return cmd_score(score_corpus, score_task, score_res);
    if (*bench) return cmd_bench(bench_corpus, bench_cfg, bench_min);
    if (*serve) return cmd_serve(serve_cfg, serve_host, serve_port);
    if (*backend) return cmd_backend(backend_listen, backend_models);
    if (*replay) return cmd_replay(replay_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << errc_name(e.code());
    if (e.seq()) std::cerr << " (seq " << *e.seq() << ")";
    std::cerr << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
