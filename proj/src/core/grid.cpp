#include "retscreen/core/grid.hpp"

#include <cmath>
#include <string>

#include "retscreen/error.hpp"

namespace retscreen {

namespace {

void check_geometry(int width, int height) {
  if (width < 1 || height < 1) {
    throw Error(Errc::kInvalidArgument, "grid geometry must be positive, got " +
                                            std::to_string(width) + "x" +
                                            std::to_string(height));
  }
}

}  // namespace

PixelGrid::PixelGrid(int width, int height, int channels)
    : width_(width), height_(height), channels_(channels) {
  check_geometry(width, height);
  if (channels != 1 && channels != 3) {
    throw Error(Errc::kInvalidArgument,
                "channels must be 1 or 3, got " + std::to_string(channels));
  }
  values_.assign(pixel_count() * static_cast<std::size_t>(channels), 0.0f);
}

PixelGrid::PixelGrid(int width, int height, int channels, std::vector<float> values)
    : PixelGrid(width, height, channels) {
  if (values.size() != values_.size()) {
    throw Error(Errc::kInvalidArgument,
                "expected " + std::to_string(values_.size()) + " values, got " +
                    std::to_string(values.size()));
  }
  for (float v : values) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw Error(Errc::kInvalidArgument, "pixel value outside [0,1]");
    }
  }
  values_ = std::move(values);
}

BinaryMask::BinaryMask(int width, int height, bool fill)
    : width_(width), height_(height) {
  check_geometry(width, height);
  bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
               fill ? 1 : 0);
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : BinaryMask(width, height) {
  if (bits.size() != bits_.size()) {
    throw Error(Errc::kInvalidArgument, "mask bit count does not match geometry");
  }
  for (auto& b : bits) b = b ? 1 : 0;
  bits_ = std::move(bits);
}

std::size_t BinaryMask::count() const noexcept {
  std::size_t n = 0;
  for (auto b : bits_) n += b;
  return n;
}

bool BinaryMask::subset_of(const BinaryMask& other) const {
  if (!same_geometry(other)) throw Error(Errc::kGeometryMismatch, "mask geometry differs");
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !other.bits_[i]) return false;
  }
  return true;
}

BinaryMask BinaryMask::operator&(const BinaryMask& other) const {
  if (!same_geometry(other)) throw Error(Errc::kGeometryMismatch, "mask geometry differs");
  BinaryMask out(width_, height_);
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] & other.bits_[i];
  return out;
}

BinaryMask BinaryMask::operator|(const BinaryMask& other) const {
  if (!same_geometry(other)) throw Error(Errc::kGeometryMismatch, "mask geometry differs");
  BinaryMask out(width_, height_);
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] | other.bits_[i];
  return out;
}

BinaryMask BinaryMask::operator~() const {
  BinaryMask out(width_, height_);
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] ? 0 : 1;
  return out;
}

}  // namespace retscreen
