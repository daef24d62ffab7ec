// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include "desmoke/error.hpp"

namespace desmoke {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingPSFrame: return "MissingPSFrame";
    case ErrorCode::CorruptClip: return "CorruptClip";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidClip: return "InvalidClip";
    case ErrorCode::IOError: return "IOError";
    case ErrorCode::InvalidFlow: return "InvalidFlow";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::NumericalError: return "NumericalError";
    case ErrorCode::StateMismatch: return "StateMismatch";
    case ErrorCode::InvalidDataset: return "InvalidDataset";
    case ErrorCode::Undefined: return "Undefined";
  }
  return "Unknown";
}

}  // namespace desmoke
