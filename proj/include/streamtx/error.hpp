/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace streamtx {

enum class ErrorCode {
    CycleDetected,
    UnknownStream,
    DuplicateName,
    WindowOwnedByTwoProcedures,
    InvalidWorkflow,
    UnknownTable,
    UnknownColumn,
    TypeMismatch,
    WindowScopeViolation,
    CorruptSnapshot,
    VersionMismatch,
    UnknownProcedure,
    WrongKind,
    BodyAbort,
    MissingInputBatch,
    Timeout,
    NotPartitionable,
    LogWriteFailure,
    CorruptLogRecord,
    ReplayDivergence,
    IOFailure,
    UnknownProcedureInSchedule,
    TooLarge,
    SchemaMismatch,
    EngineStopped,
    ConfigError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Thrown by fault-injection hooks to emulate a power loss. Deliberately not
/// derived from Error so that transaction abort handling never swallows it.
class SimulatedCrash : public std::exception {
public:
    explicit SimulatedCrash(std::string where) : where_(std::move(where)) {}
    const char* what() const noexcept override { return where_.c_str(); }

private:
    std::string where_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

} // namespace streamtx
