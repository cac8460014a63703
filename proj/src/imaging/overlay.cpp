#include "retscreen/imaging/overlay.hpp"

#include <algorithm>

#include "retscreen/error.hpp"
#include "retscreen/imaging/transform.hpp"

namespace retscreen::imaging {

PixelGrid overlay(const PixelGrid& grid, const BinaryMask& mask, Rgb color, double alpha) {
  if (grid.width() != mask.width() || grid.height() != mask.height()) {
    throw Error(Errc::kGeometryMismatch, "overlay: mask geometry differs from image");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::kInvalidArgument, "overlay: alpha outside [0,1]");
  PixelGrid out = to_rgb(grid);
  const float a = static_cast<float>(alpha);
  const float rgb[3] = {color.r, color.g, color.b};
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      if (!mask.at(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        float& v = out.at(x, y, c);
        v = a == 1.0f ? rgb[c] : std::clamp((1.0f - a) * v + a * rgb[c], 0.0f, 1.0f);
      }
    }
  }
  return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, int width, int height) {
  if (width == mask.width() && height == mask.height()) return mask;
  BinaryMask out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(mask.height() - 1, static_cast<int>((y + 0.5) * mask.height() / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(mask.width() - 1, static_cast<int>((x + 0.5) * mask.width() / width));
      out.set(x, y, mask.at(sx, sy));
    }
  }
  return out;
}

BinaryMask contour(const BinaryMask& mask) {
  BinaryMask out(mask.width(), mask.height());
  auto bg = [&](int x, int y) { return !mask.contains(x, y) || !mask.at(x, y); };
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(x, y) && (bg(x - 1, y) || bg(x + 1, y) || bg(x, y - 1) || bg(x, y + 1))) out.set(x, y);
    }
  }
  return out;
}

}  // namespace retscreen::imaging
