#pragma once

#include <string>

#include "retina/service/records.hpp"

namespace retina::service {

class Service;

class MailTransport {
 public:
  virtual ~MailTransport() = default;
  /// False (or a throw) marks the notification Failed.
  virtual bool send(const Notification& n) = 0;
};

/// SMTP through libcurl. `url` is e.g. "smtp://mail.example.org:25" or
/// "smtps://...". Credentials are optional.
class SmtpTransport : public MailTransport {
 public:
  SmtpTransport(std::string url, std::string from, std::string user = {}, std::string password = {});
  bool send(const Notification& n) override;

 private:
  std::string url_, from_, user_, password_;
};

struct DrainResult {
  int sent = 0;
  int failed = 0;
};

/// Hands every Spooled notification to `transport`, oldest first, and
/// records the outcome. Failed entries are not retried.
DrainResult drain_outbox(Service& service, MailTransport& transport);

}  // namespace retina::service
