// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mxsafe {

enum class ErrorCode {
  NonFiniteInput,
  ExponentAboveShared,
  ExponentOutOfRange,
  MalformedCode,
  InvalidArgument,
  NotReusable,
  BlockShapeMismatch,
  DimMismatch,
  TileIncompatible,
  IoError,
  CorruptHeader,
  TruncatedPayload,
  BadMagic,
  UnknownFormatId,
  CorruptBlock,
};

std::string_view error_code_name(ErrorCode code);

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mxsafe
