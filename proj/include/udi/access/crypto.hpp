#pragma once

#include <string>
#include <string_view>

namespace udi::access {

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Lower-case hex HMAC-SHA256.
std::string hmac_sha256_hex(std::string_view key, std::string_view data);

/// PBKDF2-HMAC-SHA256 credential hash, hex encoded.
std::string hash_secret(std::string_view secret, std::string_view salt, int iterations = 2000);

/// Constant-time comparison for equal-length digests.
bool digest_equal(std::string_view a, std::string_view b) noexcept;

}  // namespace udi::access
