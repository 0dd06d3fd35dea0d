#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "retina/core/error.hpp"
#include "retina/imaging/pipeline.hpp"
#include "retina/quant/quantize.hpp"
#include "retina/service/blob_store.hpp"
#include "retina/service/clock.hpp"
#include "retina/service/db.hpp"
#include "retina/service/records.hpp"
#include "retina/service/report.hpp"

namespace retina::service {

enum class ServiceErrc {
  InvalidField,
  WeakPassword,
  EmailTaken,
  BadCredentials,
  DoctorNotApproved,
  TokenExpired,
  Unauthorized,
  Forbidden,
  BadImage,
  ModelUnavailable,
  InvalidRange,
  DoctorNotFound,
  PastDate,
  NotFound,
  AlreadyCancelled,
  AlreadyApproved,
  BadRequest,
};

const char* to_string(ServiceErrc code);
int http_status(ServiceErrc code);

class ServiceError : public CodedError<ServiceErrc> {
 public:
  ServiceError(ServiceErrc code, const std::string& message, std::string field = {})
      : CodedError(code, message), field_(std::move(field)) {}
  /// Offending input slot, e.g. "left_eye" for BadImage.
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct Registration {
  std::string full_name;
  std::string email;
  std::string password;
  int age = 0;
  std::string location;
  std::string telephone;
  Role role = Role::User;
};

struct Session {
  std::int64_t user_id = 0;
  Role role = Role::User;
  std::int64_t expires_at = 0;
};

/// Forbidden unless the session's role is one of `roles`.
void require_role(const Session& s, std::initializer_list<Role> roles);

struct LoginResult {
  std::string token;  // 64 hex chars
  Role role = Role::User;
  std::int64_t user_id = 0;
  std::int64_t expires_at = 0;
};

struct DateRange {
  std::optional<std::int64_t> start_day;  // inclusive
  std::optional<std::int64_t> end_day;    // inclusive
};

struct ServiceConfig {
  std::filesystem::path data_dir;
  int password_iterations = 100000;
  std::int64_t token_ttl = 24 * 3600;
  int min_image_dim = 64;
  std::size_t max_image_bytes = 32u << 20;
  imaging::PreprocessConfig preprocess;  // target size is taken from the model
};

/// Domain layer shared by the HTTP routes, the CLI and the tests.
///
/// Every public call is safe to use from several threads. Store access is
/// serialized by one mutex; image decoding and inference run outside it
/// against the immutable model.
class Service {
 public:
  Service(ServiceConfig config, Clock clock, std::shared_ptr<const quant::QuantizedModel> model);

  UserAccount register_account(const Registration& r);
  LoginResult login(const std::string& email, const std::string& password);
  void logout(const std::string& token);
  /// Unauthorized for unknown or revoked tokens, TokenExpired past expiry.
  Session authenticate(const std::string& token);

  PredictionRecord predict_pair(const Session& s, std::span<const std::uint8_t> left,
                                std::span<const std::uint8_t> right);
  /// Caller's own records, or `user_id`'s when the caller may see them.
  std::vector<PredictionRecord> history(const Session& s, std::optional<std::int64_t> user_id, const DateRange& range);

  std::vector<UserAccount> doctors(const Session& s);
  Appointment book(const Session& s, std::int64_t doctor_id, std::int64_t scheduled_at);
  Appointment cancel(const Session& s, std::int64_t appointment_id);
  std::vector<Appointment> appointments(const Session& s);

  ReportDocument report(const Session& s, std::int64_t user_id, const DateRange& range);

  std::vector<UserAccount> list_users(const Session& s);
  UserAccount approve_doctor(const Session& s, std::int64_t doctor_id);
  void remove_user(const Session& s, std::int64_t user_id);
  std::vector<ActivityEvent> activity(const Session& s);

  /// Creates the SuperAdmin account if `email` is unused. Returns it either way.
  UserAccount ensure_admin(const std::string& email, const std::string& password, const std::string& full_name);

  /// Whole outbox, oldest first.
  std::vector<Notification> outbox();
  void set_delivery_state(std::int64_t notification_id, DeliveryState state);

  Bytes image(const std::string& ref) const { return blobs_.get(ref); }
  const std::string& model_id() const { return model_id_; }
  std::int64_t now() const { return clock_(); }

 private:
  UserAccount load_user(std::int64_t id);
  std::optional<UserAccount> find_user(std::int64_t id);
  bool can_view(const Session& s, std::int64_t user_id);
  std::vector<PredictionRecord> query_predictions(std::int64_t user_id, const DateRange& range);
  void spool(NotificationKind kind, const std::string& recipient, const Appointment& a, const std::string& subject,
             const std::string& body);
  void log_activity(std::int64_t actor, const std::string& kind, std::int64_t subject, const std::string& detail);
  imaging::PlaneTensor load_eye(std::span<const std::uint8_t> bytes, const char* field) const;

  ServiceConfig config_;
  Clock clock_;
  std::shared_ptr<const quant::QuantizedModel> model_;
  std::string model_id_;
  std::string dummy_digest_;
  BlobStore blobs_;
  std::mutex mutex_;
  Database db_;
};

}  // namespace retina::service
