#include "retina/service/records.hpp"

#include "retina/service/clock.hpp"

namespace retina::service {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::User: return "User";
    case Role::Doctor: return "Doctor";
    case Role::SuperAdmin: return "SuperAdmin";
  }
  return "?";
}

std::optional<Role> role_from_string(std::string_view s) {
  for (auto r : {Role::User, Role::Doctor, Role::SuperAdmin})
    if (to_string(r) == s) return r;
  return std::nullopt;
}

std::string_view to_string(DoctorStatus s) {
  switch (s) {
    case DoctorStatus::NotApplicable: return "n/a";
    case DoctorStatus::PendingApproval: return "PendingApproval";
    case DoctorStatus::Approved: return "Approved";
  }
  return "?";
}

std::string_view to_string(AppointmentStatus s) { return s == AppointmentStatus::Booked ? "Booked" : "Cancelled"; }

std::string_view to_string(NotificationKind k) {
  return k == NotificationKind::BookingConfirmation ? "BookingConfirmation" : "CancellationNotice";
}

std::string_view to_string(DeliveryState s) {
  switch (s) {
    case DeliveryState::Spooled: return "Spooled";
    case DeliveryState::Sent: return "Sent";
    case DeliveryState::Failed: return "Failed";
  }
  return "?";
}

nlohmann::json to_json(const UserAccount& u) {
  return {{"id", u.id},
          {"role", to_string(u.role)},
          {"full_name", u.full_name},
          {"email", u.email},
          {"age", u.age},
          {"location", u.location},
          {"telephone", u.telephone},
          {"doctor_status", to_string(u.doctor_status)},
          {"removed", u.removed},
          {"created_at", format_timestamp(u.created_at)}};
}

nlohmann::json to_json(const PredictionRecord& p) {
  return {{"id", p.id},
          {"user_id", p.user_id},
          {"first_eye", severity_name(p.first_eye)},
          {"second_eye", severity_name(p.second_eye)},
          {"first_eye_grade", ordinal(p.first_eye)},
          {"second_eye_grade", ordinal(p.second_eye)},
          {"timestamp", format_timestamp(p.timestamp)},
          {"left_image_ref", p.left_image_ref},
          {"right_image_ref", p.right_image_ref},
          {"model_id", p.model_id}};
}

nlohmann::json to_json(const Appointment& a) {
  return {{"id", a.id},
          {"user_id", a.user_id},
          {"doctor_id", a.doctor_id},
          {"scheduled_at", format_timestamp(a.scheduled_at)},
          {"status", to_string(a.status)},
          {"cancelled_by", a.cancelled_by ? nlohmann::json(to_string(*a.cancelled_by)) : nlohmann::json("none")},
          {"created_at", format_timestamp(a.created_at)}};
}

nlohmann::json to_json(const Notification& n) {
  return {{"id", n.id},
          {"recipient", n.recipient},
          {"kind", to_string(n.kind)},
          {"subject", n.subject},
          {"body", n.body},
          {"appointment_id", n.appointment_id},
          {"created_at", format_timestamp(n.created_at)},
          {"delivery_state", to_string(n.state)}};
}

nlohmann::json to_json(const ActivityEvent& e) {
  return {{"id", e.id},         {"at", format_timestamp(e.at)}, {"actor_id", e.actor_id},
          {"kind", e.kind},     {"subject_id", e.subject_id},   {"detail", e.detail}};
}

}  // namespace retina::service
