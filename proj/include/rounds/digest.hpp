#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace rounds {

// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// FNV-1a, used where a stable non-cryptographic hash is enough.
std::uint64_t stable_hash(std::string_view data);

}  // namespace rounds
