#include "retina/service/crypto.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include <stdexcept>

namespace retina::service {

std::string sha256_hex(std::span<const std::uint8_t> data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  return to_hex(std::span<const std::uint8_t>(md, len));
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Bytes random_bytes(std::size_t n) {
  Bytes out(n);
  if (n > 0 && RAND_bytes(out.data(), static_cast<int>(n)) != 1) throw std::runtime_error("RAND_bytes failed");
  return out;
}

namespace {

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw std::invalid_argument("odd-length hex");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    unsigned v = 0;
    for (int k = 0; k < 2; ++k) {
      const char c = hex[2 * i + static_cast<std::size_t>(k)];
      v <<= 4;
      if (c >= '0' && c <= '9') v |= static_cast<unsigned>(c - '0');
      else if (c >= 'a' && c <= 'f') v |= static_cast<unsigned>(c - 'a' + 10);
      else throw std::invalid_argument("bad hex digit");
    }
    out[i] = static_cast<std::uint8_t>(v);
  }
  return out;
}

Bytes pbkdf2(std::string_view password, std::span<const std::uint8_t> salt, int iterations) {
  Bytes out(32);
  if (PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()), salt.data(), static_cast<int>(salt.size()),
                        iterations, EVP_sha256(), static_cast<int>(out.size()), out.data()) != 1)
    throw std::runtime_error("PBKDF2 failed");
  return out;
}

}  // namespace

PasswordDigest hash_password(std::string_view password, int iterations) {
  if (iterations < 1) throw std::invalid_argument("iterations must be positive");
  PasswordDigest d;
  d.iterations = iterations;
  const auto salt = random_bytes(16);
  d.salt_hex = to_hex(salt);
  d.hash_hex = to_hex(pbkdf2(password, salt, iterations));
  return d;
}

bool verify_password(std::string_view password, const PasswordDigest& digest) {
  const auto expect = from_hex(digest.hash_hex);
  const auto got = pbkdf2(password, from_hex(digest.salt_hex), digest.iterations);
  return expect.size() == got.size() && CRYPTO_memcmp(expect.data(), got.data(), got.size()) == 0;
}

std::string encode_digest(const PasswordDigest& d) {
  return d.algorithm + "$" + std::to_string(d.iterations) + "$" + d.salt_hex + "$" + d.hash_hex;
}

PasswordDigest decode_digest(std::string_view text) {
  PasswordDigest d;
  std::string_view parts[4];
  for (int i = 0; i < 4; ++i) {
    const auto cut = i < 3 ? text.find('$') : text.size();
    if (cut == std::string_view::npos) throw std::invalid_argument("malformed password digest");
    parts[i] = text.substr(0, cut);
    text.remove_prefix(i < 3 ? cut + 1 : cut);
  }
  if (parts[0] != "pbkdf2-sha256") throw std::invalid_argument("unknown password digest algorithm");
  d.iterations = std::stoi(std::string(parts[1]));
  d.salt_hex = parts[2];
  d.hash_hex = parts[3];
  return d;
}

}  // namespace retina::service
