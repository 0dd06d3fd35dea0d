#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace retina {

/// Exception carrying a module-specific error code enum.
///
/// Each module declares its own `enum class` of failure kinds plus a
/// `to_string` overload for it; callers that need to branch on the failure
/// catch `CodedError<Enum>` and inspect `code()`.
template <class Code>
class CodedError : public std::runtime_error {
 public:
  CodedError(Code code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

}  // namespace retina
