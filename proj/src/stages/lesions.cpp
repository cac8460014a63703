#include "retscreen/stages/lesions.hpp"

#include <cmath>

#include "retscreen/error.hpp"

namespace retscreen::stages {

BinaryMask refine_lesion_mask(const backends::ProbabilityMask& raw, const BinaryMask& fov, const LesionConfig& cfg) {
  const auto bin = raw.binarize(cfg.binarize_cut);
  if (!bin.same_geometry(fov)) throw Error(Errc::kGeometryMismatch, "lesion mask and FOV differ in size");
  const auto opened = imaging::open(bin & fov, imaging::StructuringElement::disc(cfg.open_radius));
  const auto min_area =
      static_cast<std::size_t>(std::ceil(cfg.min_area_fraction * static_cast<double>(fov.count())));
  return imaging::remove_small_components(opened, min_area);
}

LesionVisualization visualize_lesions(const PixelGrid& image, backends::Backend& backend, const LesionConfig& cfg,
                                      const std::optional<PviResult>& gate, const PixelGrid* original) {
  if (!gate || !gate->decision) {
    throw Error(Errc::kNotGated, "lesion visualization requires a positive PVI decision").with_stage("vlr");
  }
  LesionVisualization out{{}, BinaryMask(image.width(), image.height()), image, {}};
  try {
    out.raw = backend.segment(image);
    backends::validate_probability_mask(out.raw, image.width(), image.height());
  } catch (const Error& e) {
    throw e.with_stage("vlr");
  }
  const auto fov = imaging::extract_fov(image, cfg.fov);
  out.refined = refine_lesion_mask(out.raw, fov.mask, cfg);
  for (const auto& c : imaging::connected_components(out.refined)) out.components.push_back({c.area, c.bbox});

  const PixelGrid& base = original ? *original : image;
  const auto shown = imaging::resize_nearest(out.refined, base.width(), base.height());
  out.overlay = imaging::overlay(imaging::overlay(base, shown, cfg.fill_color, cfg.fill_alpha),
                                 imaging::contour(shown), cfg.contour_color, 1.0);
  return out;
}

}  // namespace retscreen::stages
