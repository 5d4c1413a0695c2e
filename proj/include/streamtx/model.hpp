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

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "streamtx/value.hpp"

namespace streamtx {

enum class ProcedureKind : std::uint8_t { Oltp = 0, Border = 1, Interior = 2 };

std::string_view to_string(ProcedureKind k);

inline bool is_streaming(ProcedureKind k) { return k != ProcedureKind::Oltp; }

/// Tuple-based sliding window; tumbling when slide == size.
struct WindowSpec {
    std::string name;
    std::uint64_t size = 1;
    std::uint64_t slide = 1;
    std::string owner;

    bool operator==(const WindowSpec&) const = default;
};

struct ProcedureDef {
    std::string name;
    ProcedureKind kind = ProcedureKind::Oltp;
    std::vector<std::string> stream_inputs;
    std::vector<std::string> stream_outputs;
    std::vector<WindowSpec> window_defs;
    std::vector<std::string> table_inputs;
};

struct NestedGroup {
    std::string parent_name;
    std::vector<std::string> children;
    std::vector<std::pair<std::string, std::string>> partial_order;
    /// Children linearised consistently with partial_order and workflow edges;
    /// filled in by register_workflow. The first entry is the group's head.
    std::vector<std::string> execution_order;
};

struct Edge {
    std::string producer;
    std::string stream;
    std::string consumer;

    bool operator==(const Edge&) const = default;
};

/// Graph-level description handed to register_workflow. Schemas and bodies
/// live in the catalog; this is only the naming structure.
struct WorkflowDescription {
    std::vector<ProcedureDef> procedures;
    std::vector<std::string> streams;
    std::vector<std::string> tables;
    std::vector<NestedGroup> nested_groups;
};

class Workflow {
public:
    const std::vector<ProcedureDef>& procedures() const { return procedures_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<std::string>& chosen_order() const { return order_; }
    const std::vector<NestedGroup>& nested_groups() const { return groups_; }
    const std::vector<std::string>& streams() const { return streams_; }
    const std::vector<std::string>& tables() const { return tables_; }

    const ProcedureDef* find(std::string_view name) const;
    const ProcedureDef& get(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name) != nullptr; }

    /// Position of `name` in chosen_order.
    std::size_t order_index(std::string_view name) const;

    /// True if there is a directed path from `a` to `b` (a != b).
    bool reaches(std::string_view a, std::string_view b) const;

    /// Producer/consumer of a stream; empty string when the stream is external
    /// or a sink.
    const std::string& producer_of(std::string_view stream) const;
    const std::string& consumer_of(std::string_view stream) const;

    const NestedGroup* group_of(std::string_view procedure) const;
    const NestedGroup* find_group(std::string_view parent_name) const;

    std::size_t streaming_count() const;
    std::size_t border_count() const;

private:
    friend Workflow register_workflow(const WorkflowDescription&);

    std::vector<ProcedureDef> procedures_;
    std::vector<Edge> edges_;
    std::vector<std::string> order_;
    std::vector<NestedGroup> groups_;
    std::vector<std::string> streams_;
    std::vector<std::string> tables_;
    std::unordered_map<std::string, std::size_t> index_;
    std::unordered_map<std::string, std::size_t> order_pos_;
    std::unordered_map<std::string, std::string> producer_;
    std::unordered_map<std::string, std::string> consumer_;
    std::unordered_map<std::string, std::size_t> group_by_child_;
    std::vector<std::vector<bool>> reach_;
};

/// Validates the description and fixes the execution order (Kahn's method,
/// lexicographic tie-break, nested groups kept contiguous). Throws CycleDetected, UnknownStream,
/// DuplicateName, WindowOwnedByTwoProcedures or InvalidWorkflow.
Workflow register_workflow(const WorkflowDescription& desc);

/// Up to `limit` distinct topological orderings, produced in lexicographic
/// order of the ready procedure names.
std::vector<std::vector<std::string>> topological_orderings(const Workflow& w, std::size_t limit);

inline Round batch_round(const AtomicBatch& b) { return b.batch_id; }

struct TransactionExecution {
    std::string procedure;
    Round round = 0;
    std::vector<std::uint8_t> args;
    CommitSeq commit_seq = 0;

    bool operator==(const TransactionExecution&) const = default;
};

struct Schedule {
    std::vector<TransactionExecution> entries;
};

} // namespace streamtx
