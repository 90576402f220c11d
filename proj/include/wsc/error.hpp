#pragma once

#include <stdexcept>
#include <string>

namespace wsc {

enum class errc {
  shape_mismatch,
  zero_norm,
  domain,
  invalid_argument,
  bad_format,
  io,
  config,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::shape_mismatch: return "shape_mismatch";
    case errc::zero_norm: return "zero_norm";
    case errc::domain: return "domain";
    case errc::invalid_argument: return "invalid_argument";
    case errc::bad_format: return "bad_format";
    case errc::io: return "io";
    case errc::config: return "config";
  }
  return "unknown";
}

// All failure paths throw this; the CLI maps it to a one-line
// "error: <code>: <message>" on stderr and a nonzero exit.
class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace wsc
