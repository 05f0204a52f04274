#include "sqlctx/error.hpp"

namespace sqlctx {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ManifestMalformed: return "ManifestMalformed";
    case ErrorCode::MissingTableFile: return "MissingTableFile";
    case ErrorCode::TypeCoercionFailure: return "TypeCoercionFailure";
    case ErrorCode::UnknownForeignKey: return "UnknownForeignKey";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnsupportedConstruct: return "UnsupportedConstruct";
    case ErrorCode::UnknownTable: return "UnknownTable";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::NonScalarSubquery: return "NonScalarSubquery";
    case ErrorCode::MissingPlaceholderColumn: return "MissingPlaceholderColumn";
    case ErrorCode::NullInPlaceholder: return "NullInPlaceholder";
    case ErrorCode::BudgetInfeasible: return "BudgetInfeasible";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptyLabels: return "EmptyLabels";
    case ErrorCode::JudgeUnavailable: return "JudgeUnavailable";
    case ErrorCode::JudgeOutputMalformed: return "JudgeOutputMalformed";
    case ErrorCode::EndpointTimeout: return "EndpointTimeout";
    case ErrorCode::EndpointRejected: return "EndpointRejected";
    case ErrorCode::RetriesExhausted: return "RetriesExhausted";
    case ErrorCode::StaleInputHash: return "StaleInputHash";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace sqlctx
