// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scs {

enum class ErrorCode {
    // gateway
    ReplayMiss,
    BackendUnavailable,
    SchemaViolation,
    // profile / planning
    EmptyPersona,
    PlanInvalid,
    CycleDetected,
    BadPathSyntax,
    // materialization
    RootNotEmpty,
    RootMissing,
    FetchAndSynthesisFailed,
    // setup
    DependencyCycle,
    // engine
    BudgetExhausted,
    PathOutsideRoot,
    UnknownTool,
    EmptyMessageBlocked,
    UnknownMessageId,
    LogCorrupt,
    InvalidConfig,
    // evaluation / experience
    TooFewDrafts,
    DanglingReference,
    PartitionInvalid,
    EmptySample,
    ScoreOutOfRange,
    PreconditionViolation,
    // run store
    StageAlreadyComplete,
    StageMissing,
    ValidationFailed,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the pipeline. `details` carries machine-readable
/// extras such as the list of missing schema fields or diagnostic codes.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message, std::vector<std::string> details = {});

    ErrorCode code() const noexcept { return _code; }
    const std::vector<std::string>& details() const noexcept { return _details; }

private:
    ErrorCode _code;
    std::vector<std::string> _details;
};

[[noreturn]] void fail(ErrorCode code, std::string message, std::vector<std::string> details = {});

/// Shorthand for the most common failure in the generative stages.
[[noreturn]] void schema_violation(std::string message, std::vector<std::string> fields = {});

}  // namespace scs
