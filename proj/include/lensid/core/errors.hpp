#pragma once

#include <stdexcept>
#include <string>

namespace lensid {

/// Error categories; the CLI maps each category to a process exit code.
enum class ErrorKind {
  validation,      // bad input data or arguments
  io,              // missing/unwritable files
  decode,          // file exists but cannot be parsed as the expected format
  config,          // inconsistent or unknown configuration
  shape,           // tensor shape contract violated
  model,           // checkpoint/model mismatch
  phase_not_found, // no implantation interval detected
  training,        // optimization failure (divergence etc.)
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& w) : Error(ErrorKind::validation, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};
struct DecodeError : Error {
  explicit DecodeError(const std::string& w) : Error(ErrorKind::decode, w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};
struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorKind::shape, w) {}
};
struct ModelError : Error {
  explicit ModelError(const std::string& w) : Error(ErrorKind::model, w) {}
};
struct PhaseNotFoundError : Error {
  explicit PhaseNotFoundError(const std::string& w) : Error(ErrorKind::phase_not_found, w) {}
};
struct TrainingError : Error {
  explicit TrainingError(const std::string& w) : Error(ErrorKind::training, w) {}
};

inline void check(bool cond, ErrorKind kind, const std::string& msg) {
  if (cond) return;
  switch (kind) {
    case ErrorKind::validation: throw ValidationError(msg);
    case ErrorKind::io: throw IoError(msg);
    case ErrorKind::decode: throw DecodeError(msg);
    case ErrorKind::config: throw ConfigError(msg);
    case ErrorKind::shape: throw ShapeError(msg);
    case ErrorKind::model: throw ModelError(msg);
    case ErrorKind::phase_not_found: throw PhaseNotFoundError(msg);
    case ErrorKind::training: throw TrainingError(msg);
  }
  throw Error(kind, msg);
}

} // namespace lensid
