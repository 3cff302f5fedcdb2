#pragma once

#include <stdexcept>
#include <string>

namespace layoutdm {

// Error categories map one-to-one onto CLI exit codes (2, 3, 4).
enum class ErrorCategory { usage, data, numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorCategory::usage, what) {}
};

enum class DataErrorCode {
  io,
  malformed_json,
  unknown_field,
  missing_field,
  empty_layout,
  too_many_elements,
  label_out_of_vocabulary,
  out_of_range,
  attribute_mode_mismatch,
  shape_mismatch,
  invalid_argument,
};

const char* to_string(DataErrorCode code);

// Input or argument that violates a documented precondition. `subject` names
// the offending layout id or element index when there is one.
class DataError : public Error {
 public:
  DataError(DataErrorCode code, const std::string& what, std::string subject = {})
      : Error(ErrorCategory::data, std::string(to_string(code)) + ": " + what),
        code_(code),
        subject_(std::move(subject)) {}

  DataErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  DataErrorCode code_;
  std::string subject_;
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

}  // namespace layoutdm
