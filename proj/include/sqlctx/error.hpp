#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sqlctx {

enum class ErrorCode {
  // relational-core
  ManifestMalformed,
  MissingTableFile,
  TypeCoercionFailure,
  UnknownForeignKey,
  DanglingReference,
  // sql-frontend
  SyntaxError,
  UnsupportedConstruct,
  // sql-executor
  UnknownTable,
  UnknownColumn,
  TypeMismatch,
  NonScalarSubquery,
  // corpus-builder
  MissingPlaceholderColumn,
  NullInPlaceholder,
  BudgetInfeasible,
  InvalidConfig,
  // eval-harness
  EmptyLabels,
  JudgeUnavailable,
  JudgeOutputMalformed,
  // model-gateway
  EndpointTimeout,
  EndpointRejected,
  RetriesExhausted,
  // cli
  StaleInputHash,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sqlctx
