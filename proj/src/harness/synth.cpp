#include "retscreen/harness/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "retscreen/error.hpp"
#include "retscreen/imaging/codec.hpp"
#include "retscreen/imaging/transform.hpp"

namespace retscreen::harness {

namespace {

// std distributions are implementation-defined; map raw engine bits ourselves
// so corpora are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr float kFrame = 0.02f;
constexpr double kBase[3] = {0.82, 0.45, 0.24};

void stamp_vessels(const FundusRecipe& r, Rng& rng, std::vector<float>& vessel) {
  const int n = r.size;
  // Vessels fan out from a hub left of center, bending as they go.
  const double hub_x = r.center_x - 0.3 * r.radius;
  const double hub_y = r.center_y;
  for (int v = 0; v < r.vessel_count; ++v) {
    const double angle = 2.0 * std::numbers::pi * (v + rng.uniform(0.0, 0.6)) / r.vessel_count;
    const double bend = rng.uniform(-0.5, 0.5);
    const double len = r.radius * rng.uniform(0.9, 1.3);
    const double ex = hub_x + len * std::cos(angle);
    const double ey = hub_y + len * std::sin(angle);
    const double mx = (hub_x + ex) / 2.0 + bend * len * 0.5 * -std::sin(angle);
    const double my = (hub_y + ey) / 2.0 + bend * len * 0.5 * std::cos(angle);
    const double width = rng.uniform(0.9, 1.6);
    const int steps = static_cast<int>(len * 2.0);
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      const double px = (1 - t) * (1 - t) * hub_x + 2 * (1 - t) * t * mx + t * t * ex;
      const double py = (1 - t) * (1 - t) * hub_y + 2 * (1 - t) * t * my + t * t * ey;
      const int reach = static_cast<int>(std::ceil(width + 1.0));
      for (int yy = static_cast<int>(py) - reach; yy <= static_cast<int>(py) + reach; ++yy) {
        for (int xx = static_cast<int>(px) - reach; xx <= static_cast<int>(px) + reach; ++xx) {
          if (xx < 0 || yy < 0 || xx >= n || yy >= n) continue;
          const double d = std::hypot(xx - px, yy - py);
          const double profile = std::max(0.0, 1.0 - d / (width + 1.0));
          auto& cell = vessel[static_cast<std::size_t>(yy) * static_cast<std::size_t>(n) + static_cast<std::size_t>(xx)];
          cell = std::max(cell, static_cast<float>(profile));
        }
      }
    }
  }
}

}  // namespace

SynthImage render_fundus(const FundusRecipe& r) {
  const int n = r.size;
  Rng rng(r.seed);
  std::vector<float> vessel(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0f);
  stamp_vessels(r, rng, vessel);

  PixelGrid image(n, n, 3);
  BinaryMask lesion_mask(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double noise = rng.uniform(-r.texture_amplitude, r.texture_amplitude);
      const double dist = std::hypot(x - r.center_x, y - r.center_y);
      if (dist > r.radius) {
        for (int c = 0; c < 3; ++c) image.at(x, y, c) = kFrame;
        continue;
      }
      const double rel = dist / r.radius;
      double factor = (1.0 - r.vignette * rel * rel) *
                      (1.0 - r.vessel_depth * vessel[static_cast<std::size_t>(y) * static_cast<std::size_t>(n) +
                                                     static_cast<std::size_t>(x)]);
      bool in_lesion = false;
      for (const auto& l : r.lesions) {
        const double d2 = (x - l.x) * (x - l.x) + (y - l.y) * (y - l.y);
        const double g = std::exp(-d2 / (2.0 * l.sigma * l.sigma));
        factor *= l.bright ? 1.0 + l.amplitude * g : 1.0 - l.amplitude * g;
        if (g >= 0.5) in_lesion = true;
      }
      if (in_lesion) lesion_mask.set(x, y);
      for (int c = 0; c < 3; ++c) {
        image.at(x, y, c) = static_cast<float>(std::clamp(kBase[c] * factor + noise, 0.0, 1.0));
      }
    }
  }

  if (r.salt_fraction > 0.0) {
    const auto salt = static_cast<std::size_t>(std::llround(r.salt_fraction * n * n));
    for (std::size_t i = 0; i < salt; ++i) {
      const auto p = rng.below(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
      const int x = static_cast<int>(p % static_cast<std::size_t>(n));
      const int y = static_cast<int>(p / static_cast<std::size_t>(n));
      for (int c = 0; c < 3; ++c) image.at(x, y, c) = 1.0f;
    }
  }

  switch (r.degradation) {
    case Degradation::kNone: break;
    case Degradation::kBlur:
      image = imaging::box_blur(imaging::box_blur(image, r.blur_radius), r.blur_radius);
      break;
    case Degradation::kDark:
      for (float& v : image.values()) v *= 0.2f;
      image = imaging::box_blur(image, r.blur_radius);
      break;
  }
  return {std::move(image), std::move(lesion_mask)};
}

void SynthSpec::validate() const {
  auto fraction = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  if (count < 1) throw Error(Errc::kInvalidArgument, "synth: count must be >= 1");
  if (!fraction(prevalence) || !fraction(salt_fraction) || !fraction(fraction_ungradable)) {
    throw Error(Errc::kInvalidArgument, "synth: fractions must lie in [0,1]");
  }
  if (prevalence > 0.0 && !bright_lesions && !dark_lesions) {
    throw Error(Errc::kInvalidArgument, "synth: positive images need at least one lesion kind");
  }
  if (size < 64) throw Error(Errc::kInvalidArgument, "synth: size must be >= 64");
  if (blur_radius < 1) throw Error(Errc::kInvalidArgument, "synth: blur radius must be >= 1");
}

std::vector<std::pair<TruthRow, FundusRecipe>> plan_corpus(const SynthSpec& spec) {
  spec.validate();
  const auto count = static_cast<std::size_t>(spec.count);
  const auto positives = static_cast<std::size_t>(std::llround(spec.prevalence * spec.count));
  const auto degraded = static_cast<std::size_t>(std::llround(spec.fraction_ungradable * spec.count));

  Rng rng(mix(spec.seed));
  auto shuffled = [&] {
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return order;
  };
  std::vector<bool> is_positive(count, false);
  std::vector<bool> is_degraded(count, false);
  {
    const auto order = shuffled();
    for (std::size_t i = 0; i < positives; ++i) is_positive[order[i]] = true;
  }
  {
    const auto order = shuffled();
    for (std::size_t i = 0; i < degraded; ++i) is_degraded[order[i]] = true;
  }

  const double scale = spec.size / 512.0;
  std::vector<std::pair<TruthRow, FundusRecipe>> plan;
  plan.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng local(mix(spec.seed ^ mix(i + 1)));
    FundusRecipe recipe;
    recipe.size = spec.size;
    recipe.center_x = spec.size / 2.0 + local.uniform(-6.0, 6.0) * scale;
    recipe.center_y = spec.size / 2.0 + local.uniform(-6.0, 6.0) * scale;
    recipe.radius = local.uniform(220.0, 236.0) * scale;
    recipe.salt_fraction = spec.salt_fraction;
    recipe.blur_radius = spec.blur_radius;
    recipe.seed = local.bits();

    char name[32];
    std::snprintf(name, sizeof(name), "img_%04zu", i);
    TruthRow row;
    row.file = std::string("images/") + name + ".png";
    row.pvi = is_positive[i];
    row.gradable = !is_degraded[i];
    if (is_degraded[i]) recipe.degradation = local.uniform() < 0.5 ? Degradation::kBlur : Degradation::kDark;

    if (row.pvi) {
      const int n_lesions = 1 + static_cast<int>(local.below(3));
      for (int k = 0; k < n_lesions; ++k) {
        PlantedLesion lesion;
        for (int attempt = 0; attempt < 100; ++attempt) {
          lesion.sigma = local.uniform(5.0, 10.0) * scale;
          lesion.amplitude = local.uniform(0.35, 0.6);
          const double rho = recipe.radius * 0.7 * std::sqrt(local.uniform());
          const double phi = local.uniform(0.0, 2.0 * std::numbers::pi);
          lesion.x = recipe.center_x + rho * std::cos(phi);
          lesion.y = recipe.center_y + rho * std::sin(phi);
          const bool clear = std::all_of(recipe.lesions.begin(), recipe.lesions.end(), [&](const PlantedLesion& o) {
            return std::hypot(o.x - lesion.x, o.y - lesion.y) > 3.0 * (o.sigma + lesion.sigma);
          });
          if (clear) break;
        }
        if (spec.bright_lesions && spec.dark_lesions) {
          lesion.bright = local.uniform() < 0.5;
        } else {
          lesion.bright = spec.bright_lesions;
        }
        recipe.lesions.push_back(lesion);
      }
      const bool any_bright = std::any_of(recipe.lesions.begin(), recipe.lesions.end(),
                                          [](const PlantedLesion& l) { return l.bright; });
      const bool any_dark = std::any_of(recipe.lesions.begin(), recipe.lesions.end(),
                                        [](const PlantedLesion& l) { return !l.bright; });
      if (any_bright) row.labels.emplace_back("AMD");
      if (any_dark) row.labels.emplace_back("DR");
      row.mask_file = std::string("masks/") + name + "_mask.png";
    }
    plan.emplace_back(std::move(row), std::move(recipe));
  }
  return plan;
}

namespace {

void write_file(const std::filesystem::path& path, const imaging::Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
}

std::string join_labels(const std::vector<std::string>& labels) {
  std::string out;
  for (const auto& l : labels) {
    if (!out.empty()) out += ';';
    out += l;
  }
  return out;
}

}  // namespace

std::vector<TruthRow> synth_generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  const auto plan = plan_corpus(spec);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  std::filesystem::create_directories(out_dir / "masks", ec);
  if (ec) throw Error(Errc::kIoError, "cannot create corpus directories under " + out_dir.string());

  std::vector<TruthRow> rows;
  std::ostringstream csv;
  csv << "file,gradable,pvi,labels,mask_file\n";
  for (const auto& [row, recipe] : plan) {
    const auto rendered = render_fundus(recipe);
    write_file(out_dir / row.file, imaging::encode_png(rendered.image));
    if (!row.mask_file.empty()) write_file(out_dir / row.mask_file, imaging::encode_png(rendered.lesion_mask));
    csv << row.file << ',' << (row.gradable ? 1 : 0) << ',' << (row.pvi ? 1 : 0) << ','
        << join_labels(row.labels) << ',' << row.mask_file << '\n';
    rows.push_back(row);
  }
  const std::string text = csv.str();
  write_file(out_dir / "truth.csv", imaging::Bytes(text.begin(), text.end()));
  return rows;
}

std::vector<TruthRow> read_truth(const std::filesystem::path& corpus_dir) {
  std::ifstream in(corpus_dir / "truth.csv");
  if (!in) throw Error(Errc::kIoError, "cannot open " + (corpus_dir / "truth.csv").string());
  std::string line;
  std::getline(in, line);
  if (line != "file,gradable,pvi,labels,mask_file") {
    throw Error(Errc::kInvalidArgument, "truth.csv: unexpected header");
  }
  std::vector<TruthRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (!line.empty() && line.back() == ',') cols.emplace_back();
    if (cols.size() != 5) throw Error(Errc::kInvalidArgument, "truth.csv: expected 5 columns in '" + line + "'");
    TruthRow row;
    row.file = cols[0];
    row.gradable = cols[1] == "1";
    row.pvi = cols[2] == "1";
    std::stringstream labels(cols[3]);
    std::string label;
    while (std::getline(labels, label, ';')) {
      if (!label.empty()) row.labels.push_back(label);
    }
    row.mask_file = cols[4];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace retscreen::harness
