#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metaod/geometry.hpp"

namespace metaod {

/// Lowercase hex SHA-256 of a byte buffer.
std::string sha256_hex(const std::uint8_t* data, std::size_t size);
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);

/// Content hash of an image: SHA-256 of its canonical PNG encoding. The
/// same definition keys the gateway cache, trial records, and pool ids, so
/// every surface agrees on what "the same image" means.
std::string content_hash(const ImageBuffer& image);

}  // namespace metaod
