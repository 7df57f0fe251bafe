#include "metaod/hashing.hpp"

#include <openssl/evp.h>

#include <array>

#include "metaod/errors.hpp"
#include "metaod/image_io.hpp"

namespace metaod {

std::string sha256_hex(const std::uint8_t* data, std::size_t size) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!EVP_Digest(data, size, digest.data(), &len, EVP_sha256(), nullptr))
    throw Error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  return sha256_hex(bytes.data(), bytes.size());
}

std::string content_hash(const ImageBuffer& image) {
  return sha256_hex(encode_png(image));
}

}  // namespace metaod
