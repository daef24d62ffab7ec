// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace desmoke {

enum class ErrorCode {
  InvalidArgument,
  MissingPSFrame,
  CorruptClip,
  ShapeMismatch,
  InvalidClip,
  IOError,
  InvalidFlow,
  InvalidConfig,
  InvalidInput,
  NumericalError,
  StateMismatch,
  InvalidDataset,
  Undefined,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so the
/// C boundary can translate it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace desmoke
