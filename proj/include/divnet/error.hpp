#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace divnet {

enum class ErrorKind {
  validation,  // bad input data or arguments
  lookup,      // unknown product / host / service
  parse,       // malformed input stream
  format,      // well-formed input that violates a schema
  io,          // file could not be read or written
  build,       // model construction failed
  refusal,     // request exceeds a configured guard
  undefined,   // result is mathematically undefined
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::validation: return "validation error";
    case ErrorKind::lookup: return "lookup error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::format: return "format error";
    case ErrorKind::io: return "I/O error";
    case ErrorKind::build: return "build error";
    case ErrorKind::refusal: return "refusal";
    case ErrorKind::undefined: return "undefined";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace divnet
