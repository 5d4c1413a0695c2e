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

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "streamtx/model.hpp"
#include "streamtx/predicate.hpp"
#include "streamtx/storage.hpp"

namespace streamtx {

class ProcContext;

/// Host-code procedure body. Must be a deterministic function of the
/// context's inputs, arguments and table state.
using ProcedureBody = std::function<void(ProcContext&)>;

struct TableDecl {
    std::string name;
    Schema schema;
    std::vector<std::string> indexes;
};

struct StreamDecl {
    std::string name;
    Schema schema;
};

struct WindowDecl {
    WindowSpec spec;
    Schema schema;
};

/// Copies the tuples of the firing batch that satisfy `predicate` into `dst`
/// (stream, window or public table).
struct FilteredCopy {
    std::string src;
    std::string dst;
    Predicate predicate;
};

/// Inserts the firing batch into a window.
struct WindowInsertStmt {
    std::string src;
    std::string window;
};

/// On a window event, aggregates the new window contents into `dst`.
struct AggregateInsert {
    std::string window;
    std::string dst;
    AggOp op = AggOp::Count;
    std::string column;
    std::optional<std::string> group_by;
};

/// Removes the firing batch from its source stream.
struct DeleteBatch {
    std::string src;
};

using Statement = std::variant<FilteredCopy, WindowInsertStmt, AggregateInsert, DeleteBatch>;

std::string describe(const Statement& s);

/// EE trigger: a statement program attached to a stream or window.
struct StatementTrigger {
    std::string source;
    std::vector<Statement> program;
};

/// PE trigger, derived from the workflow edges.
struct ProcedureTrigger {
    std::string source;
    std::string target;
};

/// Everything needed to instantiate a partition: schemas, the workflow graph,
/// procedure bodies and statement triggers. Immutable once finalized.
class Catalog {
public:
    void add_table(TableDecl t);
    void add_stream(StreamDecl s);
    /// The window is attached to its owner's definition at finalize().
    void add_window(WindowDecl w);
    void add_procedure(ProcedureDef def, ProcedureBody body = {});
    void add_nested_group(NestedGroup g);
    void add_statement_trigger(StatementTrigger t);

    /// Registers the workflow and validates trigger programs. Throws the
    /// register_workflow errors plus UnknownTable / InvalidWorkflow.
    void finalize();
    bool finalized() const { return workflow_ != nullptr; }

    const Workflow& workflow() const { return *workflow_; }
    const ProcedureBody& body(std::string_view procedure) const;

    const std::vector<TableDecl>& tables() const { return tables_; }
    const std::vector<StreamDecl>& streams() const { return streams_; }
    const std::vector<WindowDecl>& windows() const { return windows_; }
    const std::vector<StatementTrigger>& statement_triggers() const { return triggers_; }
    std::vector<ProcedureTrigger> procedure_triggers() const;

    /// Statement programs attached to `source`, in registration order.
    const std::vector<const StatementTrigger*>& triggers_on(std::string_view source) const;
    bool has_triggers(std::string_view source) const { return !triggers_on(source).empty(); }

    bool is_external(std::string_view stream) const;
    const Schema& stream_schema(std::string_view stream) const;

    /// True when no public table is declared, so the workload can be split
    /// across independent partitions.
    bool partitionable() const { return tables_.empty(); }

    Database build_database() const;

private:
    void require_final() const;

    std::vector<TableDecl> tables_;
    std::vector<StreamDecl> streams_;
    std::vector<WindowDecl> windows_;
    std::vector<ProcedureDef> procedures_;
    std::vector<NestedGroup> groups_;
    std::map<std::string, ProcedureBody, std::less<>> bodies_;
    std::vector<StatementTrigger> triggers_;
    std::map<std::string, std::vector<const StatementTrigger*>, std::less<>> triggers_by_source_;
    std::unique_ptr<Workflow> workflow_;
};

} // namespace streamtx
