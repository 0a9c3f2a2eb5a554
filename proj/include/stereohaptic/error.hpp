#pragma once

#include <stdexcept>
#include <string>

namespace stereohaptic {

// Base for every error raised by the library. `where` names the offending
// field, file or line when one applies and is empty otherwise.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, std::string where = {})
      : std::runtime_error(where.empty() ? what : where + ": " + what), message_(what), where_(std::move(where)) {}

  const std::string& where() const noexcept { return where_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string message_;
  std::string where_;
};

}  // namespace stereohaptic
