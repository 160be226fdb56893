// SPDX-License-Identifier: Apache-2.0
#include "mxsafe/error.hpp"

namespace mxsafe {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::ExponentAboveShared: return "ExponentAboveShared";
    case ErrorCode::ExponentOutOfRange: return "ExponentOutOfRange";
    case ErrorCode::MalformedCode: return "MalformedCode";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotReusable: return "NotReusable";
    case ErrorCode::BlockShapeMismatch: return "BlockShapeMismatch";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::TileIncompatible: return "TileIncompatible";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnknownFormatId: return "UnknownFormatId";
    case ErrorCode::CorruptBlock: return "CorruptBlock";
  }
  return "Unknown";
}

}  // namespace mxsafe
