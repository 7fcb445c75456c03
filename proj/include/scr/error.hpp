#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scr {

// Failure classes map 1:1 onto CLI exit codes and HTTP error codes.
enum class ErrorClass {
  Domain,     // refusals: state, validation, lookup, parse (exit 1)
  Usage,      // bad invocation (exit 2)
  Integrity,  // corruption, IO, lock contention (exit 3)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string code, const std::string& message)
      : std::runtime_error(message), class_(cls), code_(std::move(code)) {}

  ErrorClass error_class() const noexcept { return class_; }
  // Short machine-readable code, e.g. "state", "validation", "integrity".
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorClass class_;
  std::string code_;
};

// Syntax error at a character offset within the parsed text.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : Error(ErrorClass::Domain, "parse",
              message + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

inline Error ingestion_error(const std::string& msg) {
  return Error(ErrorClass::Domain, "ingestion", msg);
}
inline Error analysis_error(const std::string& msg) {
  return Error(ErrorClass::Domain, "analysis", msg);
}
inline Error config_error(const std::string& msg) {
  return Error(ErrorClass::Domain, "config", msg);
}
inline Error validation_error(const std::string& msg) {
  return Error(ErrorClass::Domain, "validation", msg);
}
inline Error state_error(const std::string& msg) {
  return Error(ErrorClass::Domain, "state", msg);
}
inline Error lookup_error(const std::string& msg) {
  return Error(ErrorClass::Domain, "lookup", msg);
}
inline Error independence_error(const std::string& msg) {
  return Error(ErrorClass::Domain, "independence", msg);
}
inline Error staleness_error(const std::string& msg) {
  return Error(ErrorClass::Domain, "staleness", msg);
}
inline Error integrity_error(const std::string& msg) {
  return Error(ErrorClass::Integrity, "integrity", msg);
}
inline Error io_error(const std::string& msg) {
  return Error(ErrorClass::Integrity, "io", msg);
}
inline Error busy_error(const std::string& msg) {
  return Error(ErrorClass::Integrity, "busy", msg);
}
inline Error usage_error(const std::string& msg) {
  return Error(ErrorClass::Usage, "usage", msg);
}

}  // namespace scr
