#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "retscreen/core/grid.hpp"

namespace retscreen::harness {

struct PlantedLesion {
  double x = 0.0;
  double y = 0.0;
  double sigma = 6.0;      // Gaussian width, pixels
  double amplitude = 0.4;  // relative brightness change at the peak
  bool bright = true;      // drusen-like when true, hemorrhage-like when false
};

enum class Degradation { kNone, kBlur, kDark };

/// Everything needed to render one synthetic fundus deterministically.
struct FundusRecipe {
  int size = 512;
  double center_x = 256.0;
  double center_y = 256.0;
  double radius = 228.0;
  double vignette = 0.25;
  double texture_amplitude = 0.012;
  double vessel_depth = 0.04;
  int vessel_count = 8;
  std::vector<PlantedLesion> lesions;
  double salt_fraction = 0.0;
  Degradation degradation = Degradation::kNone;
  int blur_radius = 4;
  std::uint64_t seed = 1;
};

struct SynthImage {
  PixelGrid image;          // RGB, size x size
  BinaryMask lesion_mask;   // union of planted blobs thresholded at half peak
};

SynthImage render_fundus(const FundusRecipe& recipe);

struct SynthSpec {
  int count = 200;
  std::uint64_t seed = 42;
  double prevalence = 0.4;
  bool bright_lesions = true;
  bool dark_lesions = true;
  double salt_fraction = 0.002;
  int blur_radius = 4;
  double fraction_ungradable = 0.1;
  int size = 512;

  /// Throws kInvalidArgument.
  void validate() const;
};

struct TruthRow {
  std::string file;
  bool gradable = true;
  bool pvi = false;
  std::vector<std::string> labels;
  std::string mask_file;  // empty for lesion-free images
};

/// Recipes for the whole corpus: exact class counts by construction
/// (round(prevalence * count) positives, round(fraction_ungradable * count)
/// degraded frames), placed by a seeded shuffle.
std::vector<std::pair<TruthRow, FundusRecipe>> plan_corpus(const SynthSpec& spec);

/// Writes images/*.png, masks/*.png and truth.csv. Output is a pure function
/// of the spec. Throws kIoError.
std::vector<TruthRow> synth_generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

/// Throws kIoError / kInvalidArgument on a malformed truth.csv.
std::vector<TruthRow> read_truth(const std::filesystem::path& corpus_dir);

}  // namespace retscreen::harness
