#include "retscreen/harness/bench.hpp"

#include <sys/resource.h>
#include <sys/utsname.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "retscreen/error.hpp"
#include "retscreen/pipeline/screener.hpp"

namespace retscreen::harness {

namespace fs = std::filesystem;

double nearest_rank(std::vector<double> samples, double q) {
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  const auto n = samples.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return samples[rank - 1];
}

std::uint64_t peak_rss_bytes() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return static_cast<std::uint64_t>(usage.ru_maxrss) * 1024;  // Linux reports KiB
}

std::string machine_fingerprint() {
  utsname u{};
  uname(&u);
  std::string cpu = "unknown-cpu";
  std::ifstream info("/proc/cpuinfo");
  std::string line;
  while (std::getline(info, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(colon + 2);
      break;
    }
  }
  return std::string(u.sysname) + " " + u.release + " " + u.machine + "; " + cpu + "; " +
         std::to_string(std::thread::hardware_concurrency()) + " hw threads";
}

BenchResult bench_run(const fs::path& corpus_dir, const pipeline::PipelineConfig& cfg, std::size_t min_images) {
  std::vector<fs::path> images;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(corpus_dir / "images", ec)) {
    if (entry.path().extension() == ".png") images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end());
  if (images.size() < min_images) {
    throw Error(Errc::kInvalidArgument, "bench needs at least " + std::to_string(min_images) + " images in " +
                                            (corpus_dir / "images").string());
  }

  auto one_eye = cfg;
  one_eye.eyes = {pipeline::Eye::kLeft};
  auto store = std::make_shared<pipeline::MemoryStore>();
  pipeline::Screener screener(one_eye, store, pipeline::system_clock());

  std::map<std::string, std::vector<double>> samples;
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  std::size_t n = 0;
  for (const auto& path : images) {
    std::ifstream in(path, std::ios::binary);
    imaging::Bytes bytes(std::istreambuf_iterator<char>(in), {});
    const auto t0 = clock::now();
    const auto id = "bench-" + std::to_string(n++);
    screener.create_session("bench", id);
    const auto outcome = screener.submit_capture(id, pipeline::Eye::kLeft, bytes);
    if (outcome.action == pipeline::NextAction::kSessionReadyToScreen) screener.run_screening(id);
    const auto t1 = clock::now();
    const auto session = screener.session(id);
    for (const auto& [stage, ms] : session.timings()) samples[stage].push_back(ms);
    samples["total"].push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    screener.forget(id);
  }
  const double wall = std::chrono::duration<double>(clock::now() - start).count();

  BenchResult r;
  for (const auto& [stage, v] : samples) r.stages[stage] = {nearest_rank(v, 0.5), nearest_rank(v, 0.95), v.size()};
  r.images = images.size();
  r.wall_seconds = wall;
  r.images_per_second = wall > 0.0 ? static_cast<double>(images.size()) / wall : 0.0;
  r.peak_rss_bytes = peak_rss_bytes();
  r.machine = machine_fingerprint();
  return r;
}

nlohmann::json to_json(const BenchResult& r) {
  nlohmann::json stages = nlohmann::json::object();
  for (const auto& [name, s] : r.stages) {
    stages[name] = {{"p50_ms", s.p50_ms}, {"p95_ms", s.p95_ms}, {"samples", s.samples}};
  }
  return {{"stages", stages},
          {"images", r.images},
          {"wall_seconds", r.wall_seconds},
          {"images_per_second", r.images_per_second},
          {"peak_rss_bytes", r.peak_rss_bytes},
          {"machine", r.machine},
          {"batch_size", 1},
          {"workers", 1}};
}

}  // namespace retscreen::harness
