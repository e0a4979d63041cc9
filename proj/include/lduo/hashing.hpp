// hashing.hpp - SHA-256 digests for manifests and checkpoint fingerprints

#pragma once

#include <string>
#include <string_view>

namespace lduo {

std::string sha256_hex(std::string_view bytes);
// Throws std::runtime_error when the file cannot be read.
std::string sha256_file(const std::string& path);

} // namespace lduo
