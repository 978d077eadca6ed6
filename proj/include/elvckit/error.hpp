#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace elvc {

enum class ErrorKind {
  InvalidInput,
  IoError,
  CorruptFile,
  InvalidData,
  DomainMismatch,
  HopMismatch,
  InvalidManifest,
  MissingFile,
  BoundaryMismatch,
  ShapeError,
  NoEncoder,
  NoDecoder,
  NotPretrained,
  IncompatibleCheckpoint,
  MissingPair,
  InvalidSpeaker,
  InvalidConfig,
};

constexpr std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::CorruptFile: return "CorruptFile";
    case ErrorKind::InvalidData: return "InvalidData";
    case ErrorKind::DomainMismatch: return "DomainMismatch";
    case ErrorKind::HopMismatch: return "HopMismatch";
    case ErrorKind::InvalidManifest: return "InvalidManifest";
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::BoundaryMismatch: return "BoundaryMismatch";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::NoEncoder: return "NoEncoder";
    case ErrorKind::NoDecoder: return "NoDecoder";
    case ErrorKind::NotPretrained: return "NotPretrained";
    case ErrorKind::IncompatibleCheckpoint: return "IncompatibleCheckpoint";
    case ErrorKind::MissingPair: return "MissingPair";
    case ErrorKind::InvalidSpeaker: return "InvalidSpeaker";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure the toolkit reports carries one of the kinds above so callers
/// (and the CLI exit path) can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace elvc
