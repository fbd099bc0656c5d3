#pragma once

#include <string>
#include <string_view>

namespace miceval::hash {

/// Lowercase hex SHA-256 digest. Used for cache keys and config hashes.
std::string sha256_hex(std::string_view data);

}  // namespace miceval::hash
