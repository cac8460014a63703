#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "retscreen/pipeline/config.hpp"

namespace retscreen::harness {

struct LatencySummary {
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  std::size_t samples = 0;
};

struct BenchResult {
  std::map<std::string, LatencySummary> stages;  // quality, pvi, edd, vlr, total
  std::size_t images = 0;
  double wall_seconds = 0.0;
  double images_per_second = 0.0;
  std::uint64_t peak_rss_bytes = 0;
  std::string machine;
};

/// Nearest-rank percentile of unsorted samples; q in [0,1].
double nearest_rank(std::vector<double> samples, double q);

/// Peak resident set size of this process so far.
std::uint64_t peak_rss_bytes();

/// OS, architecture, CPU model and hardware thread count.
std::string machine_fingerprint();

/// Screens every image of a corpus (images/*.png, sorted) as a one-eye
/// session, one image at a time on the calling thread.
/// Throws kInvalidArgument when the corpus has fewer than min_images images.
BenchResult bench_run(const std::filesystem::path& corpus_dir, const pipeline::PipelineConfig& cfg,
                      std::size_t min_images = 50);

nlohmann::json to_json(const BenchResult& result);

}  // namespace retscreen::harness
