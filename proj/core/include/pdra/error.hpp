#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pdra {

enum class ErrorCode {
  kDisconnectedGraph,
  kDuplicateLink,
  kSelfLoop,
  kCoordinateOutOfRange,
  kInvalidNetwork,
  kParseError,
  kUnknownNode,
  kInvalidConfig,
  kTerminalState,
  kInfeasibleAction,
  kShapeMismatch,
  kNonFiniteActivation,
  kAllMasked,
  kAlreadyExpanded,
  kNonFiniteGradient,
  kInstanceTooLarge,
  kInconsistentAttributes,
  kModelTooLarge,
  kUsageError,
  kIoError,
};

std::string_view error_name(ErrorCode code);

// Every failure surfaced by the library is a pdra::Error carrying one of the
// codes above, so callers (and the CLI) can branch on the kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace pdra
