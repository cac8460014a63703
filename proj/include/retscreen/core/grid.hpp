#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace retscreen {

/// Row-major raster with 1 (gray) or 3 (RGB) interleaved channels.
/// Values are single precision so that raw payloads round-trip bit-exactly
/// over the backend wire protocol.
class PixelGrid {
 public:
  PixelGrid() = default;
  /// Zero-filled grid. Throws kInvalidArgument on bad geometry.
  PixelGrid(int width, int height, int channels);
  /// Validates geometry, count and that every value is finite in [0,1].
  PixelGrid(int width, int height, int channels, std::vector<float> values);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const noexcept { return values_.empty(); }

  float at(int x, int y, int c = 0) const noexcept {
    return values_[index(x, y, c)];
  }
  float& at(int x, int y, int c = 0) noexcept { return values_[index(x, y, c)]; }

  std::span<const float> values() const noexcept { return values_; }
  std::span<float> values() noexcept { return values_; }

  bool same_geometry(const PixelGrid& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }

  friend bool operator==(const PixelGrid&, const PixelGrid&) = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> values_;
};

/// Row-major boolean raster. Stored one byte per pixel (0 or 1).
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false);
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool at(int x, int y) const noexcept {
    return bits_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                 static_cast<std::size_t>(x)] != 0;
  }
  void set(int x, int y, bool v = true) noexcept {
    bits_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
          static_cast<std::size_t>(x)] = v ? 1 : 0;
  }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::span<std::uint8_t> bits() noexcept { return bits_; }

  std::size_t count() const noexcept;
  bool any() const noexcept { return count() > 0; }

  bool same_geometry(const BinaryMask& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }
  /// True iff every set pixel of *this is set in other. Geometry must match.
  bool subset_of(const BinaryMask& other) const;

  BinaryMask operator&(const BinaryMask& other) const;
  BinaryMask operator|(const BinaryMask& other) const;
  BinaryMask operator~() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace retscreen
