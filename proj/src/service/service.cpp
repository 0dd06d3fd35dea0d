#include "retina/service/service.hpp"

#include <algorithm>
#include <cctype>

#include "retina/imaging/codec.hpp"
#include "retina/nn/network.hpp"
#include "retina/service/crypto.hpp"

namespace retina::service {

const char* to_string(ServiceErrc code) {
  switch (code) {
    case ServiceErrc::InvalidField: return "InvalidField";
    case ServiceErrc::WeakPassword: return "WeakPassword";
    case ServiceErrc::EmailTaken: return "EmailTaken";
    case ServiceErrc::BadCredentials: return "BadCredentials";
    case ServiceErrc::DoctorNotApproved: return "DoctorNotApproved";
    case ServiceErrc::TokenExpired: return "TokenExpired";
    case ServiceErrc::Unauthorized: return "Unauthorized";
    case ServiceErrc::Forbidden: return "Forbidden";
    case ServiceErrc::BadImage: return "BadImage";
    case ServiceErrc::ModelUnavailable: return "ModelUnavailable";
    case ServiceErrc::InvalidRange: return "InvalidRange";
    case ServiceErrc::DoctorNotFound: return "DoctorNotFound";
    case ServiceErrc::PastDate: return "PastDate";
    case ServiceErrc::NotFound: return "NotFound";
    case ServiceErrc::AlreadyCancelled: return "AlreadyCancelled";
    case ServiceErrc::AlreadyApproved: return "AlreadyApproved";
    case ServiceErrc::BadRequest: return "BadRequest";
  }
  return "Unknown";
}

int http_status(ServiceErrc code) {
  switch (code) {
    case ServiceErrc::InvalidField:
    case ServiceErrc::WeakPassword:
    case ServiceErrc::BadImage:
    case ServiceErrc::InvalidRange:
    case ServiceErrc::PastDate:
    case ServiceErrc::BadRequest: return 400;
    case ServiceErrc::BadCredentials:
    case ServiceErrc::TokenExpired:
    case ServiceErrc::Unauthorized: return 401;
    case ServiceErrc::Forbidden:
    case ServiceErrc::DoctorNotApproved: return 403;
    case ServiceErrc::NotFound:
    case ServiceErrc::DoctorNotFound: return 404;
    case ServiceErrc::EmailTaken:
    case ServiceErrc::AlreadyCancelled:
    case ServiceErrc::AlreadyApproved: return 409;
    case ServiceErrc::ModelUnavailable: return 503;
  }
  return 500;
}

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS users(
  id INTEGER PRIMARY KEY,
  role TEXT NOT NULL,
  full_name TEXT NOT NULL,
  email TEXT NOT NULL UNIQUE,
  password_digest TEXT NOT NULL,
  age INTEGER NOT NULL,
  location TEXT NOT NULL,
  telephone TEXT NOT NULL,
  doctor_status TEXT NOT NULL,
  removed INTEGER NOT NULL DEFAULT 0,
  created_at INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS sessions(
  token_hash TEXT PRIMARY KEY,
  user_id INTEGER NOT NULL REFERENCES users(id),
  expires_at INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS images(
  ref TEXT PRIMARY KEY,
  format TEXT NOT NULL,
  width INTEGER NOT NULL,
  height INTEGER NOT NULL,
  channels INTEGER NOT NULL,
  byte_size INTEGER NOT NULL,
  created_at INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS predictions(
  id INTEGER PRIMARY KEY,
  user_id INTEGER NOT NULL REFERENCES users(id),
  first_eye INTEGER NOT NULL,
  second_eye INTEGER NOT NULL,
  timestamp INTEGER NOT NULL,
  left_ref TEXT NOT NULL REFERENCES images(ref),
  right_ref TEXT NOT NULL REFERENCES images(ref),
  model_id TEXT NOT NULL);
CREATE INDEX IF NOT EXISTS predictions_by_user ON predictions(user_id, timestamp);
CREATE TABLE IF NOT EXISTS appointments(
  id INTEGER PRIMARY KEY,
  user_id INTEGER NOT NULL REFERENCES users(id),
  doctor_id INTEGER NOT NULL REFERENCES users(id),
  scheduled_at INTEGER NOT NULL,
  status TEXT NOT NULL,
  cancelled_by TEXT,
  created_at INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS notifications(
  id INTEGER PRIMARY KEY,
  recipient TEXT NOT NULL,
  kind TEXT NOT NULL,
  subject TEXT NOT NULL,
  body TEXT NOT NULL,
  appointment_id INTEGER NOT NULL,
  created_at INTEGER NOT NULL,
  state TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS activity(
  id INTEGER PRIMARY KEY,
  at INTEGER NOT NULL,
  actor_id INTEGER NOT NULL,
  kind TEXT NOT NULL,
  subject_id INTEGER NOT NULL,
  detail TEXT NOT NULL);
)sql";

constexpr const char* kUserColumns =
    "id, role, full_name, email, age, location, telephone, doctor_status, removed, created_at";

DoctorStatus doctor_status_from(const std::string& s) {
  if (s == "PendingApproval") return DoctorStatus::PendingApproval;
  if (s == "Approved") return DoctorStatus::Approved;
  return DoctorStatus::NotApplicable;
}

UserAccount read_user(const Statement& st, int base = 0) {
  UserAccount u;
  u.id = st.integer(base);
  u.role = role_from_string(st.text(base + 1)).value_or(Role::User);
  u.full_name = st.text(base + 2);
  u.email = st.text(base + 3);
  u.age = static_cast<int>(st.integer(base + 4));
  u.location = st.text(base + 5);
  u.telephone = st.text(base + 6);
  u.doctor_status = doctor_status_from(st.text(base + 7));
  u.removed = st.integer(base + 8) != 0;
  u.created_at = st.integer(base + 9);
  return u;
}

constexpr const char* kAppointmentColumns = "id, user_id, doctor_id, scheduled_at, status, cancelled_by, created_at";

Appointment read_appointment(const Statement& st) {
  Appointment a;
  a.id = st.integer(0);
  a.user_id = st.integer(1);
  a.doctor_id = st.integer(2);
  a.scheduled_at = st.integer(3);
  a.status = st.text(4) == "Cancelled" ? AppointmentStatus::Cancelled : AppointmentStatus::Booked;
  if (!st.is_null(5)) a.cancelled_by = role_from_string(st.text(5));
  a.created_at = st.integer(6);
  return a;
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool valid_email(const std::string& e) {
  if (e.size() < 3 || e.size() > 254) return false;
  const auto at = e.find('@');
  if (at == std::string::npos || at == 0 || e.find('@', at + 1) != std::string::npos) return false;
  const std::string domain = e.substr(at + 1);
  const auto dot = domain.find('.');
  if (dot == std::string::npos || dot == 0 || domain.back() == '.') return false;
  for (unsigned char c : e)
    if (c <= ' ' || c >= 0x7f) return false;
  return true;
}

bool valid_telephone(const std::string& t) {
  if (t.size() > 32) return false;
  return std::all_of(t.begin(), t.end(), [](unsigned char c) {
    return std::isdigit(c) || c == '+' || c == '-' || c == ' ' || c == '(' || c == ')';
  });
}

[[noreturn]] void fail(ServiceErrc code, const std::string& message, std::string field = {}) {
  throw ServiceError(code, message, std::move(field));
}

void check_range(const DateRange& r) {
  if (r.start_day && r.end_day && *r.start_day > *r.end_day) fail(ServiceErrc::InvalidRange, "start is after end");
}

const char* format_name(imaging::ImageFormat f) {
  switch (f) {
    case imaging::ImageFormat::Png: return "png";
    case imaging::ImageFormat::Jpeg: return "jpeg";
    case imaging::ImageFormat::Ppm: return "ppm";
    case imaging::ImageFormat::Unknown: break;
  }
  return "unknown";
}

}  // namespace

void require_role(const Session& s, std::initializer_list<Role> roles) {
  if (std::find(roles.begin(), roles.end(), s.role) == roles.end())
    fail(ServiceErrc::Forbidden, "role " + std::string(to_string(s.role)) + " may not do this");
}

Service::Service(ServiceConfig config, Clock clock, std::shared_ptr<const quant::QuantizedModel> model)
    : config_(std::move(config)),
      clock_(std::move(clock)),
      model_(std::move(model)),
      blobs_(config_.data_dir / "blobs"),
      db_(config_.data_dir / "records.db") {
  if (config_.password_iterations < 1) throw std::invalid_argument("password_iterations must be >= 1");
  if (model_) {
    model_id_ = to_hex(nn::config_hash(model_->config));
    config_.preprocess.target_width = model_->config.input.w;
    config_.preprocess.target_height = model_->config.input.h;
    imaging::validate(config_.preprocess);
  }
  db_.exec(kSchema);
  dummy_digest_ = encode_digest(hash_password("unused-placeholder", config_.password_iterations));
}

// ---- accounts ----

UserAccount Service::register_account(const Registration& r) {
  const std::string email = lowercase(r.email);
  if (r.full_name.empty() || r.full_name.size() > 200) fail(ServiceErrc::InvalidField, "full_name is required", "full_name");
  if (!valid_email(email)) fail(ServiceErrc::InvalidField, "email is not valid", "email");
  if (r.age < 0 || r.age > 150) fail(ServiceErrc::InvalidField, "age must be in [0, 150]", "age");
  if (r.location.size() > 200) fail(ServiceErrc::InvalidField, "location is too long", "location");
  if (!valid_telephone(r.telephone)) fail(ServiceErrc::InvalidField, "telephone is not valid", "telephone");
  if (r.role == Role::SuperAdmin) fail(ServiceErrc::InvalidField, "SuperAdmin accounts cannot self-register", "role");
  if (r.password.size() < 8) fail(ServiceErrc::WeakPassword, "password needs at least 8 characters", "password");

  const std::string digest = encode_digest(hash_password(r.password, config_.password_iterations));
  const std::int64_t now = clock_();
  std::lock_guard lock(mutex_);
  {
    auto st = db_.prepare("SELECT 1 FROM users WHERE email = ?");
    st.bind(1, email);
    if (st.step()) fail(ServiceErrc::EmailTaken, "email is already registered", "email");
  }
  const DoctorStatus status = r.role == Role::Doctor ? DoctorStatus::PendingApproval : DoctorStatus::NotApplicable;
  auto st = db_.prepare(
      "INSERT INTO users(role, full_name, email, password_digest, age, location, telephone, doctor_status, created_at)"
      " VALUES(?, ?, ?, ?, ?, ?, ?, ?, ?)");
  st.bind(1, to_string(r.role))
      .bind(2, r.full_name)
      .bind(3, email)
      .bind(4, digest)
      .bind(5, r.age)
      .bind(6, r.location)
      .bind(7, r.telephone)
      .bind(8, to_string(status))
      .bind(9, now);
  st.run();
  return load_user(db_.last_insert_id());
}

UserAccount Service::ensure_admin(const std::string& email_in, const std::string& password,
                                  const std::string& full_name) {
  const std::string email = lowercase(email_in);
  if (!valid_email(email)) fail(ServiceErrc::InvalidField, "email is not valid", "email");
  if (password.size() < 8) fail(ServiceErrc::WeakPassword, "password needs at least 8 characters", "password");
  const std::string digest = encode_digest(hash_password(password, config_.password_iterations));
  std::lock_guard lock(mutex_);
  {
    auto st = db_.prepare(std::string("SELECT ") + kUserColumns + " FROM users WHERE email = ?");
    st.bind(1, email);
    if (st.step()) {
      UserAccount u = read_user(st);
      if (u.role != Role::SuperAdmin) fail(ServiceErrc::EmailTaken, "email belongs to a non-admin account", "email");
      return u;
    }
  }
  auto st = db_.prepare(
      "INSERT INTO users(role, full_name, email, password_digest, age, location, telephone, doctor_status, created_at)"
      " VALUES('SuperAdmin', ?, ?, ?, 0, '', '', 'n/a', ?)");
  st.bind(1, full_name).bind(2, email).bind(3, digest).bind(4, clock_());
  st.run();
  return load_user(db_.last_insert_id());
}

LoginResult Service::login(const std::string& email_in, const std::string& password) {
  const std::string email = lowercase(email_in);
  std::optional<UserAccount> user;
  std::string digest = dummy_digest_;
  {
    std::lock_guard lock(mutex_);
    auto st = db_.prepare(std::string("SELECT ") + kUserColumns + ", password_digest FROM users WHERE email = ? AND removed = 0");
    st.bind(1, email);
    if (st.step()) {
      user = read_user(st);
      digest = st.text(10);
    }
  }
  // The digest is checked even for unknown emails so that both failures
  // cost the same.
  const bool ok = verify_password(password, decode_digest(digest));
  if (!user || !ok) fail(ServiceErrc::BadCredentials, "email or password is wrong");
  if (user->role == Role::Doctor && user->doctor_status != DoctorStatus::Approved)
    fail(ServiceErrc::DoctorNotApproved, "doctor account awaits approval");

  LoginResult out;
  out.token = to_hex(random_bytes(32));
  out.role = user->role;
  out.user_id = user->id;
  const std::int64_t now = clock_();
  out.expires_at = now + config_.token_ttl;
  std::lock_guard lock(mutex_);
  Transaction tx(db_);
  auto del = db_.prepare("DELETE FROM sessions WHERE user_id = ? AND expires_at <= ?");
  del.bind(1, user->id).bind(2, now);
  del.run();
  auto st = db_.prepare("INSERT INTO sessions(token_hash, user_id, expires_at) VALUES(?, ?, ?)");
  st.bind(1, sha256_hex(out.token)).bind(2, user->id).bind(3, out.expires_at);
  st.run();
  tx.commit();
  return out;
}

void Service::logout(const std::string& token) {
  authenticate(token);
  std::lock_guard lock(mutex_);
  auto st = db_.prepare("DELETE FROM sessions WHERE token_hash = ?");
  st.bind(1, sha256_hex(token));
  st.run();
}

Session Service::authenticate(const std::string& token) {
  if (token.size() != 64) fail(ServiceErrc::Unauthorized, "missing or malformed token");
  const std::string hash = sha256_hex(token);
  std::lock_guard lock(mutex_);
  auto st = db_.prepare(
      "SELECT s.user_id, u.role, s.expires_at FROM sessions s JOIN users u ON u.id = s.user_id"
      " WHERE s.token_hash = ? AND u.removed = 0");
  st.bind(1, hash);
  if (!st.step()) fail(ServiceErrc::Unauthorized, "unknown or revoked token");
  Session s;
  s.user_id = st.integer(0);
  s.role = role_from_string(st.text(1)).value_or(Role::User);
  s.expires_at = st.integer(2);
  if (s.expires_at <= clock_()) {
    auto del = db_.prepare("DELETE FROM sessions WHERE token_hash = ?");
    del.bind(1, hash);
    del.run();
    fail(ServiceErrc::TokenExpired, "token has expired");
  }
  return s;
}

// ---- predictions ----

imaging::PlaneTensor Service::load_eye(std::span<const std::uint8_t> bytes, const char* field) const {
  if (bytes.empty()) fail(ServiceErrc::BadImage, std::string(field) + ": empty upload", field);
  if (bytes.size() > config_.max_image_bytes) fail(ServiceErrc::BadImage, std::string(field) + ": file too large", field);
  if (imaging::sniff_format(bytes) == imaging::ImageFormat::Unknown)
    fail(ServiceErrc::BadImage, std::string(field) + ": unsupported format (PNG, JPEG or PPM expected)", field);
  imaging::RasterImage img;
  try {
    img = imaging::decode_image(bytes);
  } catch (const imaging::ImageError& e) {
    fail(ServiceErrc::BadImage, std::string(field) + ": cannot decode (" + e.what() + ")", field);
  }
  if (img.width < config_.min_image_dim || img.height < config_.min_image_dim)
    fail(ServiceErrc::BadImage,
         std::string(field) + ": " + std::to_string(img.width) + "x" + std::to_string(img.height) +
             " is below the " + std::to_string(config_.min_image_dim) + "x" + std::to_string(config_.min_image_dim) +
             " minimum",
         field);
  imaging::PlaneTensor t = imaging::preprocess(img, config_.preprocess);
  if (t.channels == 1 && model_->config.input.c == 3) {
    imaging::PlaneTensor rgb(t.width, t.height, 3);
    for (std::size_t i = 0; i < t.pixel_count(); ++i)
      for (int c = 0; c < 3; ++c) rgb.data[i * 3 + c] = t.data[i];
    t = std::move(rgb);
  }
  return t;
}

PredictionRecord Service::predict_pair(const Session& s, std::span<const std::uint8_t> left,
                                       std::span<const std::uint8_t> right) {
  require_role(s, {Role::User});
  if (!model_) fail(ServiceErrc::ModelUnavailable, "no model is loaded");
  const imaging::PlaneTensor l = load_eye(left, "left_eye");
  const imaging::PlaneTensor r = load_eye(right, "right_eye");
  const quant::QResult res = quant::qforward(*model_, nn::to_batch({&l, &r}));

  PredictionRecord rec;
  rec.user_id = s.user_id;
  rec.first_eye = res.predictions.at(0);
  rec.second_eye = res.predictions.at(1);
  rec.model_id = model_id_;
  rec.left_image_ref = blobs_.put(left);
  rec.right_image_ref = blobs_.put(right);

  std::lock_guard lock(mutex_);
  rec.timestamp = clock_();
  Transaction tx(db_);
  for (auto [ref, bytes] : {std::pair{rec.left_image_ref, left}, std::pair{rec.right_image_ref, right}}) {
    const imaging::RasterImage img = imaging::decode_image(bytes);
    auto st = db_.prepare(
        "INSERT OR IGNORE INTO images(ref, format, width, height, channels, byte_size, created_at)"
        " VALUES(?, ?, ?, ?, ?, ?, ?)");
    st.bind(1, ref)
        .bind(2, format_name(imaging::sniff_format(bytes)))
        .bind(3, img.width)
        .bind(4, img.height)
        .bind(5, img.channels)
        .bind(6, static_cast<std::int64_t>(bytes.size()))
        .bind(7, rec.timestamp);
    st.run();
  }
  auto st = db_.prepare(
      "INSERT INTO predictions(user_id, first_eye, second_eye, timestamp, left_ref, right_ref, model_id)"
      " VALUES(?, ?, ?, ?, ?, ?, ?)");
  st.bind(1, rec.user_id)
      .bind(2, ordinal(rec.first_eye))
      .bind(3, ordinal(rec.second_eye))
      .bind(4, rec.timestamp)
      .bind(5, rec.left_image_ref)
      .bind(6, rec.right_image_ref)
      .bind(7, rec.model_id);
  st.run();
  rec.id = db_.last_insert_id();
  log_activity(s.user_id, "prediction", rec.id,
               std::string(severity_name(rec.first_eye)) + "/" + std::string(severity_name(rec.second_eye)));
  tx.commit();
  return rec;
}

std::vector<PredictionRecord> Service::query_predictions(std::int64_t user_id, const DateRange& range) {
  // Day d covers [d * 86400, (d + 1) * 86400).
  auto st = db_.prepare(
      "SELECT id, user_id, first_eye, second_eye, timestamp, left_ref, right_ref, model_id FROM predictions"
      " WHERE user_id = ?1 AND (?2 IS NULL OR timestamp >= ?2 * 86400) AND (?3 IS NULL OR timestamp < (?3 + 1) * 86400)"
      " ORDER BY timestamp DESC, id DESC");
  st.bind(1, user_id).bind(2, range.start_day).bind(3, range.end_day);
  std::vector<PredictionRecord> out;
  while (st.step()) {
    PredictionRecord p;
    p.id = st.integer(0);
    p.user_id = st.integer(1);
    p.first_eye = severity_from_ordinal(st.integer(2)).value_or(Severity::NoDR);
    p.second_eye = severity_from_ordinal(st.integer(3)).value_or(Severity::NoDR);
    p.timestamp = st.integer(4);
    p.left_image_ref = st.text(5);
    p.right_image_ref = st.text(6);
    p.model_id = st.text(7);
    out.push_back(std::move(p));
  }
  return out;
}

bool Service::can_view(const Session& s, std::int64_t user_id) {
  if (s.role == Role::SuperAdmin) return true;
  const auto target = find_user(user_id);
  if (!target || target->removed) return false;
  if (s.user_id == user_id) return true;
  if (s.role != Role::Doctor) return false;
  auto st = db_.prepare("SELECT 1 FROM appointments WHERE doctor_id = ? AND user_id = ? LIMIT 1");
  st.bind(1, s.user_id).bind(2, user_id);
  return st.step();
}

std::vector<PredictionRecord> Service::history(const Session& s, std::optional<std::int64_t> user_id,
                                               const DateRange& range) {
  check_range(range);
  const std::int64_t target = user_id.value_or(s.user_id);
  std::lock_guard lock(mutex_);
  if (s.role == Role::SuperAdmin && !find_user(target)) fail(ServiceErrc::NotFound, "no such user");
  if (!can_view(s, target)) fail(ServiceErrc::Forbidden, "records of this user are not visible to the caller");
  return query_predictions(target, range);
}

ReportDocument Service::report(const Session& s, std::int64_t user_id, const DateRange& range) {
  check_range(range);
  std::lock_guard lock(mutex_);
  if (s.role == Role::SuperAdmin && !find_user(user_id)) fail(ServiceErrc::NotFound, "no such user");
  if (!can_view(s, user_id)) fail(ServiceErrc::Forbidden, "records of this user are not visible to the caller");
  ReportDocument doc;
  doc.patient = load_user(user_id);
  doc.start_day = range.start_day;
  doc.end_day = range.end_day;
  doc.records = query_predictions(user_id, range);
  doc.generated_at = clock_();
  return doc;
}

// ---- appointments ----

std::vector<UserAccount> Service::doctors(const Session&) {
  std::lock_guard lock(mutex_);
  auto st = db_.prepare(std::string("SELECT ") + kUserColumns +
                        " FROM users WHERE role = 'Doctor' AND doctor_status = 'Approved' AND removed = 0 ORDER BY id");
  std::vector<UserAccount> out;
  while (st.step()) out.push_back(read_user(st));
  return out;
}

Appointment Service::book(const Session& s, std::int64_t doctor_id, std::int64_t scheduled_at) {
  require_role(s, {Role::User});
  std::lock_guard lock(mutex_);
  const auto doctor = find_user(doctor_id);
  if (!doctor || doctor->removed || doctor->role != Role::Doctor) fail(ServiceErrc::DoctorNotFound, "no such doctor");
  if (doctor->doctor_status != DoctorStatus::Approved)
    fail(ServiceErrc::DoctorNotApproved, "doctor has not been approved");
  const std::int64_t now = clock_();
  if (scheduled_at <= now) fail(ServiceErrc::PastDate, "scheduled_at must be in the future");
  const UserAccount user = load_user(s.user_id);

  Transaction tx(db_);
  auto st = db_.prepare(
      "INSERT INTO appointments(user_id, doctor_id, scheduled_at, status, cancelled_by, created_at)"
      " VALUES(?, ?, ?, 'Booked', NULL, ?)");
  st.bind(1, s.user_id).bind(2, doctor_id).bind(3, scheduled_at).bind(4, now);
  st.run();
  Appointment a;
  a.id = db_.last_insert_id();
  a.user_id = s.user_id;
  a.doctor_id = doctor_id;
  a.scheduled_at = scheduled_at;
  a.created_at = now;
  spool(NotificationKind::BookingConfirmation, user.email, a, "Appointment confirmed",
        "Dear " + user.full_name + ",\n\nYour appointment #" + std::to_string(a.id) + " with Dr. " + doctor->full_name +
            " is booked for " + format_timestamp(scheduled_at) + " UTC.\n");
  log_activity(s.user_id, "appointment_booked", a.id,
               "doctor " + std::to_string(doctor_id) + " at " + format_timestamp(scheduled_at));
  tx.commit();
  return a;
}

Appointment Service::cancel(const Session& s, std::int64_t appointment_id) {
  std::lock_guard lock(mutex_);
  Appointment a;
  {
    auto st = db_.prepare(std::string("SELECT ") + kAppointmentColumns + " FROM appointments WHERE id = ?");
    st.bind(1, appointment_id);
    if (!st.step()) fail(ServiceErrc::NotFound, "no such appointment");
    a = read_appointment(st);
  }
  const bool allowed = s.role == Role::SuperAdmin || (s.role == Role::User && a.user_id == s.user_id) ||
                       (s.role == Role::Doctor && a.doctor_id == s.user_id);
  if (!allowed) fail(ServiceErrc::Forbidden, "appointment belongs to someone else");
  if (a.status == AppointmentStatus::Cancelled) fail(ServiceErrc::AlreadyCancelled, "appointment is already cancelled");

  const UserAccount user = load_user(a.user_id);
  const UserAccount doctor = load_user(a.doctor_id);
  Transaction tx(db_);
  auto st = db_.prepare("UPDATE appointments SET status = 'Cancelled', cancelled_by = ? WHERE id = ? AND status = 'Booked'");
  st.bind(1, to_string(s.role)).bind(2, a.id);
  st.run();
  if (db_.changes() != 1) fail(ServiceErrc::AlreadyCancelled, "appointment is already cancelled");
  a.status = AppointmentStatus::Cancelled;
  a.cancelled_by = s.role;
  const std::string when = format_timestamp(a.scheduled_at);
  spool(NotificationKind::CancellationNotice, user.email, a, "Appointment cancelled",
        "Dear " + user.full_name + ",\n\nYour appointment #" + std::to_string(a.id) + " with Dr. " + doctor.full_name +
            " on " + when + " UTC was cancelled by " + std::string(to_string(s.role)) + ".\n");
  if (s.role == Role::SuperAdmin)
    spool(NotificationKind::CancellationNotice, doctor.email, a, "Appointment cancelled",
          "Dear Dr. " + doctor.full_name + ",\n\nAppointment #" + std::to_string(a.id) + " with " + user.full_name +
              " on " + when + " UTC was cancelled by the administrator.\n");
  log_activity(s.user_id, "appointment_cancelled", a.id, "by " + std::string(to_string(s.role)));
  tx.commit();
  return a;
}

std::vector<Appointment> Service::appointments(const Session& s) {
  std::lock_guard lock(mutex_);
  std::string sql = std::string("SELECT ") + kAppointmentColumns + " FROM appointments";
  if (s.role == Role::User) sql += " WHERE user_id = ?1";
  if (s.role == Role::Doctor) sql += " WHERE doctor_id = ?1";
  sql += " ORDER BY scheduled_at, id";
  auto st = db_.prepare(sql);
  if (s.role != Role::SuperAdmin) st.bind(1, s.user_id);
  std::vector<Appointment> out;
  while (st.step()) out.push_back(read_appointment(st));
  return out;
}

// ---- administration ----

std::vector<UserAccount> Service::list_users(const Session& s) {
  require_role(s, {Role::SuperAdmin});
  std::lock_guard lock(mutex_);
  auto st = db_.prepare(std::string("SELECT ") + kUserColumns + " FROM users ORDER BY id");
  std::vector<UserAccount> out;
  while (st.step()) out.push_back(read_user(st));
  return out;
}

UserAccount Service::approve_doctor(const Session& s, std::int64_t doctor_id) {
  require_role(s, {Role::SuperAdmin});
  std::lock_guard lock(mutex_);
  const auto doctor = find_user(doctor_id);
  if (!doctor || doctor->removed || doctor->role != Role::Doctor) fail(ServiceErrc::NotFound, "no such doctor");
  if (doctor->doctor_status == DoctorStatus::Approved) fail(ServiceErrc::AlreadyApproved, "doctor is already approved");
  Transaction tx(db_);
  auto st = db_.prepare(
      "UPDATE users SET doctor_status = 'Approved' WHERE id = ? AND doctor_status = 'PendingApproval'");
  st.bind(1, doctor_id);
  st.run();
  if (db_.changes() != 1) fail(ServiceErrc::AlreadyApproved, "doctor is already approved");
  log_activity(s.user_id, "doctor_approved", doctor_id, doctor->email);
  tx.commit();
  return load_user(doctor_id);
}

void Service::remove_user(const Session& s, std::int64_t user_id) {
  require_role(s, {Role::SuperAdmin});
  std::lock_guard lock(mutex_);
  const auto user = find_user(user_id);
  if (!user || user->removed) fail(ServiceErrc::NotFound, "no such user");
  if (user->role == Role::SuperAdmin) fail(ServiceErrc::Forbidden, "SuperAdmin accounts cannot be removed");
  Transaction tx(db_);
  auto up = db_.prepare("UPDATE users SET removed = 1 WHERE id = ?");
  up.bind(1, user_id);
  up.run();
  auto del = db_.prepare("DELETE FROM sessions WHERE user_id = ?");
  del.bind(1, user_id);
  del.run();
  log_activity(s.user_id, "user_removed", user_id, user->email);
  tx.commit();
}

std::vector<ActivityEvent> Service::activity(const Session& s) {
  require_role(s, {Role::SuperAdmin});
  std::lock_guard lock(mutex_);
  auto st = db_.prepare("SELECT id, at, actor_id, kind, subject_id, detail FROM activity ORDER BY id");
  std::vector<ActivityEvent> out;
  while (st.step())
    out.push_back({st.integer(0), st.integer(1), st.integer(2), st.text(3), st.integer(4), st.text(5)});
  return out;
}

// ---- outbox ----

std::vector<Notification> Service::outbox() {
  std::lock_guard lock(mutex_);
  auto st = db_.prepare(
      "SELECT id, recipient, kind, subject, body, appointment_id, created_at, state FROM notifications ORDER BY id");
  std::vector<Notification> out;
  while (st.step()) {
    Notification n;
    n.id = st.integer(0);
    n.recipient = st.text(1);
    n.kind = st.text(2) == "CancellationNotice" ? NotificationKind::CancellationNotice
                                                : NotificationKind::BookingConfirmation;
    n.subject = st.text(3);
    n.body = st.text(4);
    n.appointment_id = st.integer(5);
    n.created_at = st.integer(6);
    const std::string state = st.text(7);
    n.state = state == "Sent" ? DeliveryState::Sent : state == "Failed" ? DeliveryState::Failed : DeliveryState::Spooled;
    out.push_back(std::move(n));
  }
  return out;
}

void Service::set_delivery_state(std::int64_t notification_id, DeliveryState state) {
  std::lock_guard lock(mutex_);
  auto st = db_.prepare("UPDATE notifications SET state = ? WHERE id = ?");
  st.bind(1, to_string(state)).bind(2, notification_id);
  st.run();
  if (db_.changes() != 1) fail(ServiceErrc::NotFound, "no such notification");
}

// ---- helpers (caller holds the lock) ----

std::optional<UserAccount> Service::find_user(std::int64_t id) {
  auto st = db_.prepare(std::string("SELECT ") + kUserColumns + " FROM users WHERE id = ?");
  st.bind(1, id);
  if (!st.step()) return std::nullopt;
  return read_user(st);
}

UserAccount Service::load_user(std::int64_t id) {
  auto u = find_user(id);
  if (!u) fail(ServiceErrc::NotFound, "no such user");
  return *u;
}

void Service::spool(NotificationKind kind, const std::string& recipient, const Appointment& a,
                    const std::string& subject, const std::string& body) {
  auto st = db_.prepare(
      "INSERT INTO notifications(recipient, kind, subject, body, appointment_id, created_at, state)"
      " VALUES(?, ?, ?, ?, ?, ?, 'Spooled')");
  st.bind(1, recipient).bind(2, to_string(kind)).bind(3, subject).bind(4, body).bind(5, a.id).bind(6, clock_());
  st.run();
}

void Service::log_activity(std::int64_t actor, const std::string& kind, std::int64_t subject,
                           const std::string& detail) {
  auto st = db_.prepare("INSERT INTO activity(at, actor_id, kind, subject_id, detail) VALUES(?, ?, ?, ?, ?)");
  st.bind(1, clock_()).bind(2, actor).bind(3, kind).bind(4, subject).bind(5, detail);
  st.run();
}

}  // namespace retina::service
