#pragma once

#include <stdexcept>
#include <string>

namespace dsx {

// All processing runs at this rate; ingestion resamples to it.
inline constexpr int kSampleRate = 24000;

// Speed of sound, m/s.
inline constexpr double kSpeedOfSound = 343.0;

enum class ErrorKind {
  Format,         // malformed container / header
  Unsupported,    // recognized but not handled encoding
  Io,             // filesystem failure
  Size,           // input too short / empty
  Shape,          // dimension mismatch
  Argument,       // value outside the documented domain
  Degenerate,     // zero-energy or otherwise meaningless signal
  Resource,       // exhausted corpus / empty manifest
  Compatibility,  // checkpoint or stream-state mismatch
  Numerical,      // singular system, non-finite result
  Lookup,         // missing id
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

}  // namespace dsx
