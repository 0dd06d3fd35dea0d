#pragma once

#include <memory>
#include <string>

namespace retina::service {

class Service;

/// The /api/v1 routes over a Service. Requests are handled on a thread
/// pool, so a slow prediction never blocks other connections.
class ApiServer {
 public:
  explicit ApiServer(Service& service, std::size_t max_upload_bytes = 64u << 20);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind().
  bool listen();
  /// bind() + listen() on a background thread; returns the bound port.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace retina::service
