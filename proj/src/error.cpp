// SPDX-License-Identifier: Apache-2.0
#include "scs/error.hpp"

namespace scs {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::ReplayMiss: return "ReplayMiss";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::EmptyPersona: return "EmptyPersona";
    case ErrorCode::PlanInvalid: return "PlanInvalid";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::BadPathSyntax: return "BadPathSyntax";
    case ErrorCode::RootNotEmpty: return "RootNotEmpty";
    case ErrorCode::RootMissing: return "RootMissing";
    case ErrorCode::FetchAndSynthesisFailed: return "FetchAndSynthesisFailed";
    case ErrorCode::DependencyCycle: return "DependencyCycle";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::PathOutsideRoot: return "PathOutsideRoot";
    case ErrorCode::UnknownTool: return "UnknownTool";
    case ErrorCode::EmptyMessageBlocked: return "EmptyMessageBlocked";
    case ErrorCode::UnknownMessageId: return "UnknownMessageId";
    case ErrorCode::LogCorrupt: return "LogCorrupt";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::TooFewDrafts: return "TooFewDrafts";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::PartitionInvalid: return "PartitionInvalid";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::StageAlreadyComplete: return "StageAlreadyComplete";
    case ErrorCode::StageMissing: return "StageMissing";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, std::string message, std::vector<std::string> details):
    std::runtime_error(std::string(to_string(code)) + ": " + message), _code(code), _details(std::move(details))
{
}

void fail(ErrorCode code, std::string message, std::vector<std::string> details)
{
    throw Error(code, std::move(message), std::move(details));
}

void schema_violation(std::string message, std::vector<std::string> fields)
{
    throw Error(ErrorCode::SchemaViolation, std::move(message), std::move(fields));
}

}  // namespace scs
