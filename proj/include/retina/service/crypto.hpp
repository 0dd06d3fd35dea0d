#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "retina/core/bytes.hpp"

namespace retina::service {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> data);
std::string sha256_hex(std::string_view text);

/// `n` bytes from the OpenSSL CSPRNG.
Bytes random_bytes(std::size_t n);

struct PasswordDigest {
  std::string algorithm = "pbkdf2-sha256";
  int iterations = 0;
  std::string salt_hex;
  std::string hash_hex;
};

/// PBKDF2-HMAC-SHA256 with a fresh 16-byte salt and a 32-byte output.
PasswordDigest hash_password(std::string_view password, int iterations);
/// Constant-time comparison against a stored digest.
bool verify_password(std::string_view password, const PasswordDigest& digest);

/// "pbkdf2-sha256$<iterations>$<salt>$<hash>" and back.
std::string encode_digest(const PasswordDigest& d);
PasswordDigest decode_digest(std::string_view text);

}  // namespace retina::service
