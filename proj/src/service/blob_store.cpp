#include "retina/service/blob_store.hpp"

#include <fstream>
#include <stdexcept>

#include "retina/service/crypto.hpp"

namespace retina::service {

namespace fs = std::filesystem;

BlobStore::BlobStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

fs::path BlobStore::path_of(const std::string& ref) const {
  constexpr std::string_view prefix = "sha256:";
  if (ref.size() != prefix.size() + 64 || ref.compare(0, prefix.size(), prefix) != 0)
    throw std::runtime_error("malformed blob ref");
  const std::string hex = ref.substr(prefix.size());
  for (char c : hex)
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) throw std::runtime_error("malformed blob ref");
  return root_ / hex.substr(0, 2) / hex;
}

std::string BlobStore::put(std::span<const std::uint8_t> bytes) const {
  const std::string ref = "sha256:" + sha256_hex(bytes);
  const fs::path path = path_of(ref);
  if (fs::exists(path)) return ref;
  fs::create_directories(path.parent_path());
  // Unique temp name: concurrent writers of the same content must not
  // share a partially written file.
  fs::path tmp = path;
  tmp += "." + to_hex(random_bytes(8)) + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("cannot write blob " + tmp.string());
  }
  fs::rename(tmp, path);
  return ref;
}

bool BlobStore::contains(const std::string& ref) const { return fs::exists(path_of(ref)); }

Bytes BlobStore::get(const std::string& ref) const {
  const fs::path path = path_of(ref);
  if (!fs::exists(path)) throw std::runtime_error("unknown blob " + ref);
  return read_file(path);
}

}  // namespace retina::service
