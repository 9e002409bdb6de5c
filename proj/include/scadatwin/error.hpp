#pragma once

#include <stdexcept>
#include <string>

namespace scadatwin {

enum class ErrorCode {
  NoConvergence,
  MalformedModel,
  UnknownAsset,
  ConfigError,
  ConnectionClosed,
  Refused,
  Unreachable,
  UnknownTap,
  InvalidCombination,
  Malformed,
  AuthFailed,
  UnknownCommand,
  BlacklistViolation,
  ScriptInvariantBroken,
  Unimplemented,
  IoError,
  MalformedTrace,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace scadatwin
