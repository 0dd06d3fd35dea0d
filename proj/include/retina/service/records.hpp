#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "retina/core/severity.hpp"

namespace retina::service {

enum class Role { User, Doctor, SuperAdmin };
enum class DoctorStatus { NotApplicable, PendingApproval, Approved };

std::string_view to_string(Role r);
std::optional<Role> role_from_string(std::string_view s);
std::string_view to_string(DoctorStatus s);

struct UserAccount {
  std::int64_t id = 0;
  Role role = Role::User;
  std::string full_name;
  std::string email;
  int age = 0;
  std::string location;
  std::string telephone;
  DoctorStatus doctor_status = DoctorStatus::NotApplicable;
  bool removed = false;
  std::int64_t created_at = 0;
};

struct PredictionRecord {
  std::int64_t id = 0;
  std::int64_t user_id = 0;
  Severity first_eye = Severity::NoDR;   // left upload slot
  Severity second_eye = Severity::NoDR;  // right upload slot
  std::int64_t timestamp = 0;
  std::string left_image_ref;  // "sha256:<hex>"
  std::string right_image_ref;
  std::string model_id;  // hex config hash
};

enum class AppointmentStatus { Booked, Cancelled };
std::string_view to_string(AppointmentStatus s);

struct Appointment {
  std::int64_t id = 0;
  std::int64_t user_id = 0;
  std::int64_t doctor_id = 0;
  std::int64_t scheduled_at = 0;
  AppointmentStatus status = AppointmentStatus::Booked;
  std::optional<Role> cancelled_by;
  std::int64_t created_at = 0;
};

enum class NotificationKind { BookingConfirmation, CancellationNotice };
enum class DeliveryState { Spooled, Sent, Failed };
std::string_view to_string(NotificationKind k);
std::string_view to_string(DeliveryState s);

struct Notification {
  std::int64_t id = 0;
  std::string recipient;
  NotificationKind kind = NotificationKind::BookingConfirmation;
  std::string subject;
  std::string body;
  std::int64_t appointment_id = 0;
  std::int64_t created_at = 0;
  DeliveryState state = DeliveryState::Spooled;
};

struct ActivityEvent {
  std::int64_t id = 0;
  std::int64_t at = 0;
  std::int64_t actor_id = 0;
  std::string kind;  // prediction, appointment_booked, appointment_cancelled, ...
  std::int64_t subject_id = 0;
  std::string detail;
};

nlohmann::json to_json(const UserAccount& u);
nlohmann::json to_json(const PredictionRecord& p);
nlohmann::json to_json(const Appointment& a);
nlohmann::json to_json(const Notification& n);
nlohmann::json to_json(const ActivityEvent& e);

}  // namespace retina::service
