#pragma once

#include <filesystem>
#include <string>

#include "retina/core/bytes.hpp"

namespace retina::service {

/// Content-addressed files under `root/<first two hex>/<sha256>`. A ref is
/// "sha256:<hex>". Writing the same bytes twice is a no-op.
class BlobStore {
 public:
  explicit BlobStore(std::filesystem::path root);

  std::string put(std::span<const std::uint8_t> bytes) const;
  bool contains(const std::string& ref) const;
  /// Throws std::runtime_error for malformed or unknown refs.
  Bytes get(const std::string& ref) const;

 private:
  std::filesystem::path path_of(const std::string& ref) const;
  std::filesystem::path root_;
};

}  // namespace retina::service
