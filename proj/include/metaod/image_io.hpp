#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "metaod/geometry.hpp"

namespace metaod {

/// Decode a PNG or JPEG file (sniffed by magic bytes) into RGBA8.
ImageBuffer load_image(const std::filesystem::path& path);

/// Deterministic PNG encoding: fixed settings, no ancillary chunks, so one
/// pixel buffer always yields one byte sequence (cache keys depend on this).
std::vector<std::uint8_t> encode_png(const ImageBuffer& image);

void save_png(const ImageBuffer& image, const std::filesystem::path& path);

ImageBuffer decode_png(const std::uint8_t* data, std::size_t size);

}  // namespace metaod
