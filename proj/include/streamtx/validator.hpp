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

#include <string>
#include <vector>

#include "streamtx/model.hpp"
#include "streamtx/storage.hpp"

namespace streamtx {

enum class ValidationMode : std::uint8_t { FixedOrder, AnyTopological };
enum class ViolationKind : std::uint8_t { WorkflowOrder, StreamOrder, NestedInterleave, NestedPartialOrder, WindowVisibility };

std::string_view to_string(ValidationMode m);
std::string_view to_string(ViolationKind k);

struct Violation {
    ViolationKind kind;
    /// Offending pair, as "procedure@round".
    std::string first;
    std::string second;
    Round round = 0;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool correct() const { return violations.empty(); }
    std::size_t count(ViolationKind k) const;
};

/// Judges a committed schedule against the workflow and stream order
/// constraints and nested-group atomicity. Entries naming neither a
/// procedure of `w` nor one of its groups throw UnknownProcedureInSchedule;
/// OLTP entries are unconstrained.
ValidationReport validate(const Schedule& s, const Workflow& w, ValidationMode mode);

/// Every correct schedule of the R·n TEs of `w`'s streaming procedures, in
/// lexicographic order of (round, procedure name) sequences. Throws TooLarge
/// when R·n > 12.
std::vector<Schedule> enumerate_correct_schedules(const Workflow& w, Round rounds, std::size_t limit,
                                                  ValidationMode mode = ValidationMode::AnyTopological);

/// Flags window accesses made by anyone but the owner.
ValidationReport validate_window_visibility(const std::vector<WindowAccess>& trace);

} // namespace streamtx
