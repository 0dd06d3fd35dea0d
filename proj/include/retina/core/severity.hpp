#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace retina {

/// Five-level diabetic retinopathy grade.
enum class Severity : int { NoDR = 0, Mild = 1, Moderate = 2, Severe = 3, ProliferateDR = 4 };

inline constexpr int kSeverityCount = 5;

inline constexpr std::array<Severity, kSeverityCount> kAllSeverities = {
    Severity::NoDR, Severity::Mild, Severity::Moderate, Severity::Severe, Severity::ProliferateDR};

/// Display strings: No_DR, Mild, Moderate, Severe, Proliferate_DR.
std::string_view severity_name(Severity s);
std::optional<Severity> severity_from_name(std::string_view name);
std::optional<Severity> severity_from_ordinal(long ordinal);

constexpr int ordinal(Severity s) { return static_cast<int>(s); }

}  // namespace retina
