#include "retina/core/severity.hpp"

namespace retina {

namespace {
constexpr std::array<std::string_view, kSeverityCount> kNames = {"No_DR", "Mild", "Moderate", "Severe",
                                                                  "Proliferate_DR"};
}

std::string_view severity_name(Severity s) { return kNames[static_cast<std::size_t>(ordinal(s))]; }

std::optional<Severity> severity_from_name(std::string_view name) {
  for (auto s : kAllSeverities)
    if (kNames[static_cast<std::size_t>(ordinal(s))] == name) return s;
  return std::nullopt;
}

std::optional<Severity> severity_from_ordinal(long value) {
  if (value < 0 || value >= kSeverityCount) return std::nullopt;
  return static_cast<Severity>(value);
}

}  // namespace retina
