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

#include <span>
#include <string>
#include <vector>

#include "streamtx/catalog.hpp"
#include "streamtx/metrics.hpp"
#include "streamtx/storage.hpp"

namespace streamtx {

/// Procedure arguments as logged: client values plus, for border procedures,
/// the input batch.
struct ProcArgs {
    std::vector<Value> values;
    std::optional<AtomicBatch> batch;

    bool operator==(const ProcArgs&) const = default;
};

std::vector<std::uint8_t> encode_args(const ProcArgs& a);
ProcArgs decode_args(std::span<const std::uint8_t> blob);

/// Runs statement-trigger programs inside the storage layer, on behalf of the
/// TE identified by `caller`, recording every change in that TE's undo buffer.
class StatementEngine {
public:
    StatementEngine(const Catalog& catalog, Database& db, Counters& counters)
        : catalog_(catalog), db_(db), counters_(counters) {}

    /// Appends rows to `stream` as part of batch `batch_id`, then fires the
    /// stream's programs on the new tuples.
    void append(std::string_view stream, BatchId batch_id, std::vector<std::vector<Value>> rows, std::int64_t ts,
                const Caller& caller, UndoBuffer& undo);
    /// Like append, but keeps per-tuple timestamps.
    void append_tuples(std::string_view stream, BatchId batch_id, std::span<const Tuple> tuples, const Caller& caller,
                       UndoBuffer& undo);
    /// Inserts into a window and fires its programs once per event.
    std::vector<FullWindowEvent> window_insert(std::string_view window, std::span<const Tuple> tuples,
                                               const Caller& caller, UndoBuffer& undo);

    /// Runs the programs attached to `source` for the tuples just stored there.
    void fire(std::string_view source, std::span<const Tuple> tuples, BatchId batch_id, const Caller& caller,
              UndoBuffer& undo);

private:
    void fire_window_event(const FullWindowEvent& ev, const Caller& caller, UndoBuffer& undo);
    void write_rows(std::string_view dst, BatchId batch_id, std::span<const Tuple> tuples, const Caller& caller,
                    UndoBuffer& undo);

    const Catalog& catalog_;
    Database& db_;
    Counters& counters_;
};

/// The interface a procedure body sees. Every storage call counts as one
/// crossing of the engine boundary.
class ProcContext {
public:
    ProcContext(const ProcedureDef& def, Round round, const ProcArgs& args, Database& db, StatementEngine& stmts,
                UndoBuffer& undo, Counters& counters)
        : def_(def), round_(round), args_(args), db_(db), stmts_(stmts), undo_(undo), counters_(counters) {}

    const std::string& procedure() const { return def_.name; }
    const ProcedureDef& definition() const { return def_; }
    Round round() const { return round_; }
    const ProcArgs& args() const { return args_; }
    const std::vector<Value>& values() const { return args_.values; }

    /// Catalog metadata; not a storage access.
    TableKind kind_of(std::string_view table) const { return db_.kind_of(table); }
    const Schema& schema_of(std::string_view table) const { return db_.schema_of(table); }

    /// Batch `round` of an input stream (empty if absent).
    const std::vector<Tuple>& input(std::string_view stream) const;
    /// Batch `round` of the first input stream.
    const std::vector<Tuple>& input() const;

    std::vector<Tuple> select(std::string_view table, const Predicate& p = Predicate::all());
    void insert(std::string_view table, std::vector<Value> values, std::int64_t ts = 0);
    std::size_t erase(std::string_view table, const Predicate& p);
    std::vector<std::vector<Value>> aggregate(std::string_view table, AggOp op, std::string_view column,
                                              std::optional<std::string_view> group_by = std::nullopt);
    std::vector<FullWindowEvent> window_insert(std::string_view window, std::span<const Tuple> tuples);
    /// Appends rows to an output stream as batch `round`.
    void emit(std::string_view stream, std::vector<std::vector<Value>> rows, std::int64_t ts = 0);

    [[noreturn]] void abort(const std::string& reason);

    void set_result(std::vector<std::vector<Value>> rows) { result_ = std::move(rows); }
    std::vector<std::vector<Value>>& result() { return result_; }

private:
    Caller caller() const { return {def_.name, round_}; }

    const ProcedureDef& def_;
    Round round_;
    const ProcArgs& args_;
    Database& db_;
    StatementEngine& stmts_;
    UndoBuffer& undo_;
    Counters& counters_;
    std::vector<std::vector<Value>> result_;
};

} // namespace streamtx
