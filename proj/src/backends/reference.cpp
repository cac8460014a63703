#include "retscreen/backends/reference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "retscreen/error.hpp"
#include "retscreen/imaging/morphology.hpp"
#include "retscreen/imaging/transform.hpp"

namespace retscreen::backends {

namespace {

double squash(double x, double scale) { return x <= 0.0 ? 0.0 : 1.0 - std::exp(-x / scale); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

QualityFeatures reference_quality_features(const PixelGrid& image, const ReferenceParams& params) {
  QualityFeatures f;
  imaging::FovInfo fov;
  try {
    fov = imaging::extract_fov(image, params.fov);
  } catch (const Error& e) {
    if (e.code() != Errc::kNoFov) throw;
    f.no_fov = true;
    return f;
  }
  f.fov_coverage = fov.coverage;

  const PixelGrid luma = imaging::to_gray(image);
  const int w = luma.width();
  const int h = luma.height();

  std::vector<float> inside;
  inside.reserve(fov.mask.count());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (fov.mask.at(x, y)) inside.push_back(luma.at(x, y));
    }
  }
  f.contrast = std::clamp(static_cast<double>(imaging::percentile(inside, 0.95) - imaging::percentile(inside, 0.05)),
                          0.0, 1.0);

  // Laplacian variance on pixels whose whole 3x3 neighbourhood is in the FOV.
  const BinaryMask core = imaging::erode(fov.mask, imaging::StructuringElement::disc(1));
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t n = 0;
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      if (!core.at(x, y)) continue;
      const double lap = static_cast<double>(luma.at(x - 1, y)) + luma.at(x + 1, y) + luma.at(x, y - 1) +
                         luma.at(x, y + 1) - 4.0 * luma.at(x, y);
      sum += lap;
      sum_sq += lap * lap;
      ++n;
    }
  }
  if (n > 0) {
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
    f.sharpness = var / (var + params.sharpness_kappa);
  }

  // Dispersion of block means over a grid x grid tiling; blocks count when at
  // least half their pixels lie in the FOV.
  const int g = params.uniformity_grid;
  std::vector<double> means;
  for (int by = 0; by < g; ++by) {
    for (int bx = 0; bx < g; ++bx) {
      const int x0 = bx * w / g;
      const int x1 = (bx + 1) * w / g;
      const int y0 = by * h / g;
      const int y1 = (by + 1) * h / g;
      double s = 0.0;
      std::size_t in = 0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          if (!fov.mask.at(x, y)) continue;
          s += luma.at(x, y);
          ++in;
        }
      }
      const auto total = static_cast<std::size_t>((x1 - x0) * (y1 - y0));
      if (total > 0 && 2 * in >= total) means.push_back(s / static_cast<double>(in));
    }
  }
  if (!means.empty()) {
    double m = 0.0;
    for (double v : means) m += v;
    m /= static_cast<double>(means.size());
    double var = 0.0;
    for (double v : means) var += (v - m) * (v - m);
    var /= static_cast<double>(means.size());
    const double dispersion = m > 0.0 ? std::sqrt(var) / m : 1.0;
    f.illumination_uniformity = std::clamp(1.0 - dispersion, 0.0, 1.0);
  }
  return f;
}

double reference_quality_score(const QualityFeatures& f, const ReferenceParams& params) {
  if (f.no_fov) return 0.0;
  const auto& wt = params.quality_weights;
  const double s = wt[0] * f.fov_coverage + wt[1] * f.sharpness + wt[2] * f.illumination_uniformity +
                   wt[3] * f.contrast;
  return std::clamp(s, 0.0, 1.0);
}

LesionAnalysis reference_lesion_analysis(const PixelGrid& image, const ReferenceParams& params) {
  const PixelGrid luma = imaging::to_gray(image);
  const int w = luma.width();
  const int h = luma.height();
  const auto values = luma.values();

  LesionAnalysis out;
  out.probability.width = w;
  out.probability.height = h;
  out.probability.probs.assign(luma.pixel_count(), 0.0f);

  // Support: the thresholded fundus with isolated bright specks opened away.
  const float p99 = imaging::percentile(std::vector<float>(values.begin(), values.end()), 0.99);
  if (p99 <= 0.0f) return out;
  BinaryMask support(w, h);
  {
    const double cut = params.fov.threshold_fraction * p99;
    auto bits = support.bits();
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = values[i] > cut ? 1 : 0;
  }
  if (params.support_open_radius > 0) {
    support = imaging::open(support, imaging::StructuringElement::disc(params.support_open_radius));
  }
  if (!support.any()) return out;

  std::vector<float> background(values.begin(), values.end());
  for (int pass = 0; pass < params.background_passes; ++pass) {
    const auto mean = imaging::box_mean(background, w, h, params.background_radius, &support);
    for (std::size_t i = 0; i < background.size(); ++i) background[i] = static_cast<float>(mean[i]);
  }

  std::vector<double> response(luma.pixel_count(), 0.0);
  BinaryMask fired(w, h);
  for (std::size_t i = 0; i < response.size(); ++i) {
    if (!support.bits()[i]) continue;
    const double b = std::max(static_cast<double>(background[i]), params.background_floor);
    response[i] = (values[i] - background[i]) / b;
    const double p = sigmoid((std::abs(response[i]) - params.response_threshold) / params.response_width);
    out.probability.probs[i] = static_cast<float>(p);
    fired.bits()[i] = p >= 0.5 ? 1 : 0;
  }

  if (params.detection_open_radius > 0) {
    fired = imaging::open(fired, imaging::StructuringElement::disc(params.detection_open_radius));
  }
  for (std::size_t i = 0; i < response.size(); ++i) {
    if (!fired.bits()[i]) continue;
    (response[i] > 0.0 ? out.bright_mass : out.dark_mass) += out.probability.probs[i];
  }
  return out;
}

std::map<std::string, double> reference_diagnosis(const LesionAnalysis& lesions, const QualityFeatures& f) {
  const double amd = squash(lesions.bright_mass, 60.0);
  const double dr = squash(lesions.dark_mass, 60.0);
  const double cataract = f.no_fov ? 0.0 : 0.8 * std::clamp(1.0 - f.contrast / 0.25, 0.0, 1.0);
  const double glaucoma = 0.05 + 0.1 * (1.0 - f.illumination_uniformity);
  const double mmd = 0.05 + 0.3 * (1.0 - f.illumination_uniformity);
  const double others = 0.6 * (1.0 - std::max({amd, dr, cataract}));
  auto unit = [](double v) { return std::clamp(v, 0.0, 1.0); };
  return {{"AMD", unit(amd)},         {"Cataract", unit(cataract)}, {"DR", unit(dr)},
          {"Glaucoma", unit(glaucoma)}, {"MMD", unit(mmd)},         {"Others", unit(others)}};
}

ReferenceBackend::ReferenceBackend(BackendDescriptor descriptor, ReferenceParams params)
    : descriptor_(std::move(descriptor)), params_(params) {
  descriptor_.kind = BackendDescriptor::Kind::kReference;
}

ScoreMap ReferenceBackend::classify(const PixelGrid& image, Task task) {
  if (!descriptor_.supports(capability_for(task))) {
    throw Error(Errc::kUnsupported, "backend '" + descriptor_.model_id + "' does not support " +
                                        std::string(capability_name(capability_for(task))));
  }
  const auto start = std::chrono::steady_clock::now();
  ScoreMap out;
  out.model_id = descriptor_.model_id;
  switch (task) {
    case Task::kQuality: {
      const auto features = reference_quality_features(image, params_);
      out.entries[std::string(kGradableLabel)] = reference_quality_score(features, params_);
      break;
    }
    case Task::kPvi: {
      const auto lesions = reference_lesion_analysis(image, params_);
      out.entries[std::string(kPviLabel)] =
          squash(lesions.bright_mass + lesions.dark_mass, params_.pvi_mass_scale);
      break;
    }
    case Task::kEdd: {
      const auto lesions = reference_lesion_analysis(image, params_);
      const auto features = reference_quality_features(image, params_);
      out.entries = reference_diagnosis(lesions, features);
      break;
    }
  }
  out.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

ProbabilityMask ReferenceBackend::segment(const PixelGrid& image) {
  if (!descriptor_.supports(Capability::kSegment)) {
    throw Error(Errc::kUnsupported, "backend '" + descriptor_.model_id + "' does not support segment");
  }
  return reference_lesion_analysis(image, params_).probability;
}

}  // namespace retscreen::backends
