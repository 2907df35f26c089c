#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "flow360/raster.hpp"

namespace flow360 {

/// Leading float of every Middlebury .flo file.
inline constexpr float kFloSentinel = 202021.25f;

/// Reads a Middlebury .flo file: float sentinel, int32 width, int32 height,
/// then width*height interleaved (u, v) float32 pairs, all little-endian.
/// Throws Error{BadMagic | TruncatedFile | TrailingData | NonfiniteValues |
/// MalformedHeader | Io}.
FlowField read_flo(const std::filesystem::path& path);
void write_flo(const FlowField& flow, const std::filesystem::path& path);

FlowField decode_flo(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_flo(const FlowField& flow);

/// Binary PNM (P6 for 3 channels, P5 for 1 channel), maxval 255.
Image decode_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pnm(const Image& img);

/// Dispatches on the file signature when reading and on the extension when
/// writing (.ppm/.pgm/.pnm -> PNM, .png -> PNG). 8-bit samples are scaled to
/// [0,1] on read; on write values are clamped to [0,1] and quantized with
/// round-half-away-from-zero.
Image read_image(const std::filesystem::path& path);
void write_image(const Image& img, const std::filesystem::path& path);

std::uint8_t quantize_unit(float value);

/// Whole-file helpers. write_file_atomic writes to a sibling temporary and
/// renames it into place.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);

}  // namespace flow360
