#include "retina/service/http.hpp"

#include <charconv>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "retina/service/clock.hpp"
#include "retina/service/service.hpp"

namespace retina::service {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ServiceErrc code, const std::string& message, const std::string& field = {}) {
  json body = {{"code", to_string(code)}, {"message", message}};
  if (!field.empty()) body["field"] = field;
  send_json(res, http_status(code), body);
}

[[noreturn]] void bad_request(const std::string& message, const std::string& field = {}) {
  throw ServiceError(ServiceErrc::BadRequest, message, field);
}

std::int64_t parse_id(const std::string& text, const char* what) {
  std::int64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || v < 1) bad_request(std::string("invalid ") + what, what);
  return v;
}

json parse_body(const httplib::Request& req) {
  json j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) bad_request("body must be a JSON object");
  return j;
}

template <class T>
T field(const json& j, const char* name, bool required = true, T fallback = {}) {
  const auto it = j.find(name);
  if (it == j.end() || it->is_null()) {
    if (required) throw ServiceError(ServiceErrc::InvalidField, std::string(name) + " is required", name);
    return fallback;
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ServiceError(ServiceErrc::InvalidField, std::string(name) + " has the wrong type", name);
  }
}

DateRange parse_range(const httplib::Request& req) {
  DateRange r;
  for (auto [name, slot] : {std::pair{"start", &r.start_day}, std::pair{"end", &r.end_day}}) {
    if (!req.has_param(name)) continue;
    const auto day = parse_date(req.get_param_value(name));
    if (!day) bad_request(std::string(name) + " must be YYYY-MM-DD", name);
    *slot = day;
  }
  return r;
}

std::string bearer(const httplib::Request& req) {
  const std::string h = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (h.size() <= prefix.size() || h.compare(0, prefix.size(), prefix) != 0) return {};
  return h.substr(prefix.size());
}

json array_of(const auto& items) {
  json a = json::array();
  for (const auto& x : items) a.push_back(to_json(x));
  return a;
}

}  // namespace

struct ApiServer::Impl {
  Service& service;
  httplib::Server server;
  std::thread thread;

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
  using AuthedHandler = std::function<void(const Session&, const httplib::Request&, httplib::Response&)>;

  Handler wrap(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (const ServiceError& e) {
        send_error(res, e.code(), e.what(), e.field());
      } catch (const std::exception& e) {
        send_json(res, 500, {{"code", "Internal"}, {"message", e.what()}});
      }
    };
  }

  Handler authed(AuthedHandler h) {
    return wrap([this, h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      const Session s = service.authenticate(bearer(req));
      h(s, req, res);
    });
  }

  Impl(Service& svc, std::size_t max_upload) : service(svc) {
    server.set_payload_max_length(max_upload);
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 404)
        send_json(res, 404, {{"code", "NotFound"}, {"message", "no such endpoint"}});
      else if (res.status == 413)
        send_json(res, 413, {{"code", "BadRequest"}, {"message", "payload too large"}});
    });
    const std::string api = "/api/v1";

    server.Get(api + "/health", wrap([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}, {"model_id", service.model_id()}});
    }));

    server.Post(api + "/auth/register", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const json j = parse_body(req);
      Registration r;
      r.full_name = field<std::string>(j, "full_name");
      r.email = field<std::string>(j, "email");
      r.password = field<std::string>(j, "password");
      r.age = field<int>(j, "age");
      r.location = field<std::string>(j, "location", false);
      r.telephone = field<std::string>(j, "telephone", false);
      const auto role = role_from_string(field<std::string>(j, "role", false, "User"));
      if (!role) throw ServiceError(ServiceErrc::InvalidField, "role must be User or Doctor", "role");
      r.role = *role;
      send_json(res, 201, to_json(service.register_account(r)));
    }));

    server.Post(api + "/auth/login", wrap([this](const httplib::Request& req, httplib::Response& res) {
      const json j = parse_body(req);
      const LoginResult r = service.login(field<std::string>(j, "email"), field<std::string>(j, "password"));
      send_json(res, 200,
                {{"token", r.token},
                 {"role", to_string(r.role)},
                 {"user_id", r.user_id},
                 {"expires_at", format_timestamp(r.expires_at)}});
    }));

    server.Post(api + "/auth/logout", authed([this](const Session&, const httplib::Request& req, httplib::Response& res) {
      service.logout(bearer(req));
      res.status = 204;
    }));

    server.Post(api + "/predictions", authed([this](const Session& s, const httplib::Request& req, httplib::Response& res) {
      require_role(s, {Role::User});
      if (!req.is_multipart_form_data()) bad_request("expected multipart/form-data with left_eye and right_eye");
      for (const char* slot : {"left_eye", "right_eye"})
        if (!req.has_file(slot))
          throw ServiceError(ServiceErrc::BadImage, std::string(slot) + ": missing upload", slot);
      const std::string left = req.get_file_value("left_eye").content;
      const std::string right = req.get_file_value("right_eye").content;
      auto bytes = [](const std::string& s) {
        return std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
      };
      send_json(res, 201, to_json(service.predict_pair(s, bytes(left), bytes(right))));
    }));

    server.Get(api + "/predictions", authed([this](const Session& s, const httplib::Request& req, httplib::Response& res) {
      std::optional<std::int64_t> user;
      if (req.has_param("user_id")) user = parse_id(req.get_param_value("user_id"), "user_id");
      const auto records = service.history(s, user, parse_range(req));
      send_json(res, 200, {{"count", records.size()}, {"records", array_of(records)}});
    }));

    server.Get(api + "/doctors", authed([this](const Session& s, const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"doctors", array_of(service.doctors(s))}});
    }));

    server.Post(api + "/appointments", authed([this](const Session& s, const httplib::Request& req, httplib::Response& res) {
      require_role(s, {Role::User});
      const json j = parse_body(req);
      const auto doctor_id = field<std::int64_t>(j, "doctor_id");
      const auto when = parse_timestamp(field<std::string>(j, "scheduled_at"));
      if (!when) throw ServiceError(ServiceErrc::InvalidField, "scheduled_at must be YYYY-MM-DD HH:MM:SS", "scheduled_at");
      send_json(res, 201, to_json(service.book(s, doctor_id, *when)));
    }));

    server.Get(api + "/appointments", authed([this](const Session& s, const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"appointments", array_of(service.appointments(s))}});
    }));

    server.Delete(api + R"(/appointments/([^/]+))",
                  authed([this](const Session& s, const httplib::Request& req, httplib::Response& res) {
                    send_json(res, 200, to_json(service.cancel(s, parse_id(req.matches[1], "appointment id"))));
                  }));

    server.Get(api + R"(/reports/([0-9]+)(\.json)?)",
               authed([this](const Session& s, const httplib::Request& req, httplib::Response& res) {
                 const std::int64_t user = parse_id(req.matches[1], "user_id");
                 const ReportDocument doc = service.report(s, user, parse_range(req));
                 if (req.matches[2].matched) {
                   send_json(res, 200, to_json(doc));
                   return;
                 }
                 const Bytes pdf = render_pdf(doc);
                 res.status = 200;
                 res.set_header("Content-Disposition", "attachment; filename=\"report-" + std::to_string(user) + ".pdf\"");
                 res.set_content(std::string(pdf.begin(), pdf.end()), "application/pdf");
               }));

    server.Get(api + "/admin/users", authed([this](const Session& s, const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"users", array_of(service.list_users(s))}});
    }));

    server.Post(api + R"(/admin/doctors/([^/]+)/approve)",
                authed([this](const Session& s, const httplib::Request& req, httplib::Response& res) {
                  require_role(s, {Role::SuperAdmin});
                  send_json(res, 200, to_json(service.approve_doctor(s, parse_id(req.matches[1], "doctor id"))));
                }));

    server.Delete(api + R"(/admin/users/([^/]+))",
                  authed([this](const Session& s, const httplib::Request& req, httplib::Response& res) {
                    require_role(s, {Role::SuperAdmin});
                    service.remove_user(s, parse_id(req.matches[1], "user id"));
                    res.status = 204;
                  }));

    server.Get(api + "/admin/activity", authed([this](const Session& s, const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"events", array_of(service.activity(s))}});
    }));

    server.Get(api + "/admin/notifications",
               authed([this](const Session& s, const httplib::Request&, httplib::Response& res) {
                 require_role(s, {Role::SuperAdmin});
                 send_json(res, 200, {{"notifications", array_of(service.outbox())}});
               }));
  }
};

ApiServer::ApiServer(Service& service, std::size_t max_upload_bytes)
    : impl_(std::make_unique<Impl>(service, max_upload_bytes)) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool ApiServer::listen() { return impl_->server.listen_after_bind(); }

int ApiServer::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  if (bound < 0) return bound;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void ApiServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace retina::service
