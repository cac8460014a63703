#pragma once

#include <array>

#include "retscreen/backends/backend.hpp"
#include "retscreen/imaging/fov.hpp"

namespace retscreen::backends {

// Deterministic, feature-based stand-ins for the trained networks. They are
// NOT clinical models: they exist so the whole pipeline can be exercised
// without private data or weights. Every output is a pure function of the
// pixel values and these parameters.

struct ReferenceParams {
  imaging::FovParams fov;

  // Quality.
  double sharpness_kappa = 0.0005;
  // coverage, sharpness, illumination uniformity, contrast
  std::array<double, 4> quality_weights = {0.35, 0.30, 0.20, 0.15};
  int uniformity_grid = 8;

  // Lesion response: |L - B| / max(B, floor), B a masked background estimate.
  int background_radius = 15;
  int background_passes = 2;
  double background_floor = 0.05;
  double response_threshold = 0.14;
  double response_width = 0.02;
  int support_open_radius = 1;
  int detection_open_radius = 1;
  double pvi_mass_scale = 40.0;
};

struct QualityFeatures {
  double fov_coverage = 0.0;
  double sharpness = 0.0;
  double illumination_uniformity = 0.0;
  double contrast = 0.0;
  bool no_fov = false;
};

QualityFeatures reference_quality_features(const PixelGrid& image, const ReferenceParams& params = {});

/// Weighted sum of the features; 0 when no field of view was found.
double reference_quality_score(const QualityFeatures& features, const ReferenceParams& params = {});

struct LesionAnalysis {
  ProbabilityMask probability;
  double bright_mass = 0.0;  // summed probability of surviving bright detections
  double dark_mass = 0.0;
};

LesionAnalysis reference_lesion_analysis(const PixelGrid& image, const ReferenceParams& params = {});

/// Scores for the six diagnosis labels from lesion polarity and image features.
std::map<std::string, double> reference_diagnosis(const LesionAnalysis& lesions, const QualityFeatures& features);

class ReferenceBackend final : public Backend {
 public:
  explicit ReferenceBackend(BackendDescriptor descriptor = {}, ReferenceParams params = {});

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  ScoreMap classify(const PixelGrid& image, Task task) override;
  ProbabilityMask segment(const PixelGrid& image) override;

  const ReferenceParams& params() const { return params_; }

 private:
  BackendDescriptor descriptor_;
  ReferenceParams params_;
};

}  // namespace retscreen::backends
