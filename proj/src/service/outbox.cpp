#include "retina/service/outbox.hpp"

#include <curl/curl.h>

#include <cstring>
#include <mutex>

#include "retina/service/clock.hpp"
#include "retina/service/service.hpp"

namespace retina::service {

namespace {

struct Payload {
  std::string data;
  std::size_t pos = 0;
};

std::size_t read_payload(char* buf, std::size_t size, std::size_t n, void* user) {
  auto* p = static_cast<Payload*>(user);
  const std::size_t len = std::min(size * n, p->data.size() - p->pos);
  std::memcpy(buf, p->data.data() + p->pos, len);
  p->pos += len;
  return len;
}

}  // namespace

SmtpTransport::SmtpTransport(std::string url, std::string from, std::string user, std::string password)
    : url_(std::move(url)), from_(std::move(from)), user_(std::move(user)), password_(std::move(password)) {
  static std::once_flag init;
  std::call_once(init, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
}

bool SmtpTransport::send(const Notification& n) {
  CURL* curl = curl_easy_init();
  if (!curl) return false;
  Payload payload;
  payload.data = "To: <" + n.recipient + ">\r\nFrom: <" + from_ + ">\r\nSubject: " + n.subject +
                 "\r\nDate: " + format_timestamp(n.created_at) + " +0000\r\n\r\n";
  for (char c : n.body) payload.data += c == '\n' ? std::string("\r\n") : std::string(1, c);

  curl_slist* rcpt = curl_slist_append(nullptr, ("<" + n.recipient + ">").c_str());
  const std::string from = "<" + from_ + ">";
  curl_easy_setopt(curl, CURLOPT_URL, url_.c_str());
  curl_easy_setopt(curl, CURLOPT_MAIL_FROM, from.c_str());
  curl_easy_setopt(curl, CURLOPT_MAIL_RCPT, rcpt);
  curl_easy_setopt(curl, CURLOPT_READFUNCTION, read_payload);
  curl_easy_setopt(curl, CURLOPT_READDATA, &payload);
  curl_easy_setopt(curl, CURLOPT_UPLOAD, 1L);
  curl_easy_setopt(curl, CURLOPT_TIMEOUT, 30L);
  if (!user_.empty()) {
    curl_easy_setopt(curl, CURLOPT_USERNAME, user_.c_str());
    curl_easy_setopt(curl, CURLOPT_PASSWORD, password_.c_str());
  }
  const CURLcode rc = curl_easy_perform(curl);
  curl_slist_free_all(rcpt);
  curl_easy_cleanup(curl);
  return rc == CURLE_OK;
}

DrainResult drain_outbox(Service& service, MailTransport& transport) {
  DrainResult r;
  for (const Notification& n : service.outbox()) {
    if (n.state != DeliveryState::Spooled) continue;
    bool ok = false;
    try {
      ok = transport.send(n);
    } catch (const std::exception&) {
      ok = false;
    }
    service.set_delivery_state(n.id, ok ? DeliveryState::Sent : DeliveryState::Failed);
    ++(ok ? r.sent : r.failed);
  }
  return r;
}

}  // namespace retina::service
