#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "retscreen/core/grid.hpp"

namespace retscreen::imaging {

enum class ImageFormat { kPng, kJpeg };

using Bytes = std::vector<std::uint8_t>;

/// Decodes an 8-bit image; value v maps to v/255. Grayscale sources yield a
/// single-channel grid, everything else RGB (alpha is dropped).
/// Throws kDecodeError on malformed or truncated input.
PixelGrid decode(std::span<const std::uint8_t> bytes, ImageFormat format);

/// PNG or JPEG by magic bytes.
std::optional<ImageFormat> sniff_format(std::span<const std::uint8_t> bytes);

/// Sniffs the format from the magic bytes, then decodes.
PixelGrid decode(std::span<const std::uint8_t> bytes);

/// 8-bit PNG; values are quantized with round-to-nearest.
Bytes encode_png(const PixelGrid& grid);
Bytes encode_png(const BinaryMask& mask);

/// Baseline JPEG, mainly for fixtures; quality in [1,100].
Bytes encode_jpeg(const PixelGrid& grid, int quality = 95);

/// Mask from a decoded PNG: any nonzero first-channel value is foreground.
BinaryMask mask_from_grid(const PixelGrid& grid);

}  // namespace retscreen::imaging
