#include "pdra/error.hpp"

namespace pdra {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::kDuplicateLink: return "DuplicateLink";
    case ErrorCode::kSelfLoop: return "SelfLoop";
    case ErrorCode::kCoordinateOutOfRange: return "CoordinateOutOfRange";
    case ErrorCode::kInvalidNetwork: return "InvalidNetwork";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kUnknownNode: return "UnknownNode";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kTerminalState: return "TerminalState";
    case ErrorCode::kInfeasibleAction: return "InfeasibleAction";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::kAllMasked: return "AllMasked";
    case ErrorCode::kAlreadyExpanded: return "AlreadyExpanded";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kInstanceTooLarge: return "InstanceTooLarge";
    case ErrorCode::kInconsistentAttributes: return "InconsistentAttributes";
    case ErrorCode::kModelTooLarge: return "ModelTooLarge";
    case ErrorCode::kUsageError: return "UsageError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace pdra
