#include "retscreen/imaging/transform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "retscreen/error.hpp"

namespace retscreen::imaging {

namespace {

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

// Bilinear sample at continuous pixel-center coordinates; outside reads 0.
float sample_zero(const PixelGrid& g, double x, double y, int c) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const double ax = x - fx;
  const double ay = y - fy;
  auto px = [&](int xi, int yi) -> double {
    if (xi < 0 || yi < 0 || xi >= g.width() || yi >= g.height()) return 0.0;
    return g.at(xi, yi, c);
  };
  const double top = px(x0, y0) * (1.0 - ax) + px(x0 + 1, y0) * ax;
  const double bottom = px(x0, y0 + 1) * (1.0 - ax) + px(x0 + 1, y0 + 1) * ax;
  return clamp01(top * (1.0 - ay) + bottom * ay);
}

// Summed-area table with one row/column of zero padding.
std::vector<double> integral(std::span<const double> plane, int w, int h) {
  std::vector<double> sat(static_cast<std::size_t>(w + 1) * static_cast<std::size_t>(h + 1), 0.0);
  const auto stride = static_cast<std::size_t>(w + 1);
  for (int y = 0; y < h; ++y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      row += plane[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)];
      sat[(static_cast<std::size_t>(y) + 1) * stride + static_cast<std::size_t>(x) + 1] =
          sat[static_cast<std::size_t>(y) * stride + static_cast<std::size_t>(x) + 1] + row;
    }
  }
  return sat;
}

double window_sum(const std::vector<double>& sat, int w, int x0, int y0, int x1, int y1) {
  const auto stride = static_cast<std::size_t>(w + 1);
  auto at = [&](int x, int y) { return sat[static_cast<std::size_t>(y) * stride + static_cast<std::size_t>(x)]; };
  return at(x1 + 1, y1 + 1) - at(x0, y1 + 1) - at(x1 + 1, y0) + at(x0, y0);
}

}  // namespace

PixelGrid to_gray(const PixelGrid& grid) {
  if (grid.channels() == 1) return grid;
  PixelGrid out(grid.width(), grid.height(), 1);
  const auto in = grid.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = clamp01(0.299 * in[3 * i] + 0.587 * in[3 * i + 1] + 0.114 * in[3 * i + 2]);
  }
  return out;
}

PixelGrid to_rgb(const PixelGrid& grid) {
  if (grid.channels() == 3) return grid;
  PixelGrid out(grid.width(), grid.height(), 3);
  const auto in = grid.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) dst[3 * i] = dst[3 * i + 1] = dst[3 * i + 2] = in[i];
  return out;
}

PixelGrid resize(const PixelGrid& grid, int width, int height) {
  if (width < 1 || height < 1) throw Error(Errc::kInvalidArgument, "resize: target geometry must be positive");
  if (width == grid.width() && height == grid.height()) return grid;
  PixelGrid out(width, height, grid.channels());
  const double sx = static_cast<double>(grid.width()) / width;
  const double sy = static_cast<double>(grid.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double src_y = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(grid.height() - 1));
    const int y0 = static_cast<int>(std::floor(src_y));
    const int y1 = std::min(y0 + 1, grid.height() - 1);
    const double ay = src_y - y0;
    for (int x = 0; x < width; ++x) {
      const double src_x = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(grid.width() - 1));
      const int x0 = static_cast<int>(std::floor(src_x));
      const int x1 = std::min(x0 + 1, grid.width() - 1);
      const double ax = src_x - x0;
      for (int c = 0; c < grid.channels(); ++c) {
        const double top = grid.at(x0, y0, c) * (1.0 - ax) + grid.at(x1, y0, c) * ax;
        const double bottom = grid.at(x0, y1, c) * (1.0 - ax) + grid.at(x1, y1, c) * ax;
        out.at(x, y, c) = clamp01(top * (1.0 - ay) + bottom * ay);
      }
    }
  }
  return out;
}

PixelGrid gamma_correct(const PixelGrid& grid, double gamma) {
  if (!std::isfinite(gamma) || gamma <= 0.0) {
    throw Error(Errc::kBadGamma, "gamma must be finite and positive");
  }
  PixelGrid out = grid;
  for (float& v : out.values()) v = clamp01(std::pow(static_cast<double>(v), gamma));
  return out;
}

PixelGrid flip_h(const PixelGrid& grid) {
  PixelGrid out(grid.width(), grid.height(), grid.channels());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      for (int c = 0; c < grid.channels(); ++c) out.at(grid.width() - 1 - x, y, c) = grid.at(x, y, c);
    }
  }
  return out;
}

PixelGrid rotate(const PixelGrid& grid, double degrees) {
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  const double cx = (grid.width() - 1) / 2.0;
  const double cy = (grid.height() - 1) / 2.0;
  PixelGrid out(grid.width(), grid.height(), grid.channels());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double src_x = cx + cs * dx - sn * dy;
      const double src_y = cy + sn * dx + cs * dy;
      for (int c = 0; c < grid.channels(); ++c) out.at(x, y, c) = sample_zero(grid, src_x, src_y, c);
    }
  }
  return out;
}

PixelGrid scale_about_center(const PixelGrid& grid, double factor) {
  if (!std::isfinite(factor) || factor <= 0.0) {
    throw Error(Errc::kInvalidArgument, "scale factor must be positive");
  }
  const double cx = (grid.width() - 1) / 2.0;
  const double cy = (grid.height() - 1) / 2.0;
  PixelGrid out(grid.width(), grid.height(), grid.channels());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      const double src_x = cx + (x - cx) / factor;
      const double src_y = cy + (y - cy) / factor;
      for (int c = 0; c < grid.channels(); ++c) out.at(x, y, c) = sample_zero(grid, src_x, src_y, c);
    }
  }
  return out;
}

std::vector<double> box_mean(std::span<const float> plane, int width, int height, int radius,
                             const BinaryMask* support) {
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<double> values(n);
  std::vector<double> weights(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = support ? static_cast<double>(support->bits()[i]) : 1.0;
    weights[i] = w;
    values[i] = plane[i] * w;
  }
  const auto sat_v = integral(values, width, height);
  const auto sat_w = integral(weights, width, height);
  std::vector<double> out(n, 0.0);
  for (int y = 0; y < height; ++y) {
    const int y0 = std::max(0, y - radius);
    const int y1 = std::min(height - 1, y + radius);
    for (int x = 0; x < width; ++x) {
      const int x0 = std::max(0, x - radius);
      const int x1 = std::min(width - 1, x + radius);
      const double wsum = window_sum(sat_w, width, x0, y0, x1, y1);
      if (wsum > 0.5) {
        out[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)] =
            window_sum(sat_v, width, x0, y0, x1, y1) / wsum;
      }
    }
  }
  return out;
}

PixelGrid box_blur(const PixelGrid& grid, int radius) {
  if (radius < 1) return grid;
  PixelGrid out(grid.width(), grid.height(), grid.channels());
  std::vector<float> plane(grid.pixel_count());
  for (int c = 0; c < grid.channels(); ++c) {
    for (std::size_t i = 0; i < plane.size(); ++i) {
      plane[i] = grid.values()[i * static_cast<std::size_t>(grid.channels()) + static_cast<std::size_t>(c)];
    }
    const auto blurred = box_mean(plane, grid.width(), grid.height(), radius);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      out.values()[i * static_cast<std::size_t>(grid.channels()) + static_cast<std::size_t>(c)] =
          clamp01(blurred[i]);
    }
  }
  return out;
}

float percentile(std::vector<float> values, double q) {
  if (values.empty()) return 0.0f;
  const auto k = static_cast<std::size_t>(std::floor(std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1)));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

}  // namespace retscreen::imaging
