#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "retina/core/bytes.hpp"
#include "retina/quant/quantize.hpp"
#include "retina/service/http.hpp"
#include "retina/service/service.hpp"

namespace harness {

using namespace retina;
using namespace retina::service;

// 2024-07-18 13:34:35 UTC
inline constexpr std::int64_t kEpoch = 1721309675;

class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Settable clock shared between the test and the service.
class ManualClock {
 public:
  explicit ManualClock(std::int64_t t = kEpoch) : t_(std::make_shared<std::atomic<std::int64_t>>(t)) {}
  Clock clock() const {
    return [t = t_] { return t->load(); };
  }
  void set(std::int64_t t) { t_->store(t); }
  void advance(std::int64_t dt) { t_->fetch_add(dt); }
  std::int64_t now() const { return t_->load(); }

 private:
  std::shared_ptr<std::atomic<std::int64_t>> t_;
};

/// Micro preset, He init, calibrated on a few synthetic images.
std::shared_ptr<const quant::QuantizedModel> micro_model(std::uint64_t seed = 3);

/// Seeded random PNG.
Bytes random_png(int width, int height, std::uint64_t seed, int channels = 3);

/// Low PBKDF2 cost so that tests stay fast.
ServiceConfig test_config(const std::filesystem::path& dir);

/// Service plus HTTP server on an ephemeral localhost port.
struct LiveServer {
  explicit LiveServer(const std::string& tag, std::shared_ptr<const quant::QuantizedModel> model = micro_model());
  ~LiveServer();

  TempDir dir;
  ManualClock clock;
  std::unique_ptr<Service> service;
  std::unique_ptr<ApiServer> api;
  int port = -1;
  std::string admin_email = "admin@clinic.test";
  std::string admin_password = "admin-pass-123";
};

/// Scripted scenarios over HTTP. Each returns its failed expectations;
/// empty means the scenario passed.
std::vector<std::string> e2e_flow(LiveServer& server);
std::vector<std::string> role_matrix(LiveServer& server);
std::vector<std::string> report_determinism();

}  // namespace harness
