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
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "streamtx/predicate.hpp"
#include "streamtx/value.hpp"
#include "streamtx/window.hpp"

namespace streamtx {

enum class TableKind : std::uint8_t { Public = 0, Stream = 1, Window = 2, Progress = 3 };

std::string_view to_string(TableKind k);

using RowId = std::uint64_t;

struct ValueHash {
    std::size_t operator()(const Value& v) const noexcept { return std::hash<Value>{}(v); }
};

/// Unordered multiset of rows with optional per-column hash indexes. Rows are
/// keyed by a monotonically assigned row id so that undo can restore them in
/// place and scans are deterministic.
class PublicTable {
public:
    PublicTable(std::string name, Schema schema, std::vector<std::string> indexed_columns);

    const std::string& name() const { return name_; }
    const Schema& schema() const { return schema_; }
    const std::map<RowId, Tuple>& rows() const { return rows_; }
    RowId next_rowid() const { return next_rowid_; }
    const std::vector<std::string>& indexed_columns() const { return indexed_names_; }

    RowId insert(Tuple t);
    void erase(RowId id);
    void reinsert(RowId id, Tuple t);
    void set_next_rowid(RowId id) { next_rowid_ = id; }

    /// Row ids matching `p` in ascending id order; uses an index when the
    /// predicate has an equality term on an indexed column.
    std::vector<RowId> match(const BoundPredicate& p) const;
    std::vector<RowId> scan(const BoundPredicate& p) const;

    bool operator==(const PublicTable& o) const {
        return name_ == o.name_ && schema_ == o.schema_ && rows_ == o.rows_ && next_rowid_ == o.next_rowid_ &&
               indexed_names_ == o.indexed_names_;
    }

private:
    void index_add(RowId id, const Tuple& t);
    void index_remove(RowId id, const Tuple& t);

    std::string name_;
    Schema schema_;
    std::vector<std::string> indexed_names_;
    std::map<std::size_t, std::unordered_map<Value, std::vector<RowId>, ValueHash>> indexes_;
    std::map<RowId, Tuple> rows_;
    RowId next_rowid_ = 1;
};

/// A stream as a time-varying table, ordered by (batch_id, tuple_id).
class StreamTable {
public:
    StreamTable(std::string name, Schema schema) : name_(std::move(name)), schema_(std::move(schema)) {}

    const std::string& name() const { return name_; }
    const Schema& schema() const { return schema_; }
    const std::map<BatchId, std::vector<Tuple>>& batches() const { return batches_; }
    TupleId next_tuple_id() const { return next_tuple_id_; }
    void set_next_tuple_id(TupleId id) { next_tuple_id_ = id; }

    std::map<BatchId, std::vector<Tuple>>& mutable_batches() { return batches_; }

    bool operator==(const StreamTable&) const = default;

private:
    std::string name_;
    Schema schema_;
    std::map<BatchId, std::vector<Tuple>> batches_;
    TupleId next_tuple_id_ = 1;
};

/// Engine bookkeeping persisted alongside the tables: the last committed round
/// per streaming procedure, and rounds whose work was dropped because an
/// upstream step aborted or produced nothing.
struct Progress {
    std::map<std::string, Round> last_round;
    std::set<std::pair<std::string, Round>> dropped;

    bool operator==(const Progress&) const = default;
};

/// Who is touching storage. An empty procedure name is the engine itself.
struct Caller {
    std::string_view procedure;
    Round round = 0;
};

struct WindowAccess {
    std::string accessor;
    Round round = 0;
    std::string window;
    std::string owner;
    bool write = false;

    bool operator==(const WindowAccess&) const = default;
};

class UndoBuffer {
public:
    struct PublicInserted {
        std::string table;
        RowId id;
        RowId prev_next_rowid;
    };
    struct PublicDeleted {
        std::string table;
        RowId id;
        Tuple row;
    };
    struct StreamInserted {
        std::string table;
        BatchId batch;
        TupleId prev_next_tuple_id;
    };
    struct StreamDeleted {
        std::string table;
        BatchId batch;
        std::size_t position;
        Tuple row;
    };
    struct WindowChanged {
        std::string table;
        WindowUndo undo;
    };
    using Entry = std::variant<PublicInserted, PublicDeleted, StreamInserted, StreamDeleted, WindowChanged>;

    void record(Entry e) { entries_.push_back(std::move(e)); }
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }
    std::vector<Entry>& entries() { return entries_; }
    void clear() { entries_.clear(); }

private:
    std::vector<Entry> entries_;
};

enum class AggOp : std::uint8_t { Count, Sum, Avg, Min, Max };

std::string_view to_string(AggOp op);
std::optional<AggOp> parse_agg_op(std::string_view s);

/// Aggregates a row set. Without group_by: at most one row {agg}; with it,
/// rows {group, agg} sorted by group value. Count over nothing is {0}; the
/// other aggregates over nothing yield no row.
std::vector<std::vector<Value>> aggregate_rows(std::span<const Tuple> rows, const Schema& schema, AggOp op,
                                               std::string_view column, std::optional<std::string_view> group_by);

struct SnapshotHeader {
    std::uint32_t version = 0;
    std::uint32_t partition = 0;
    CommitSeq commit_seq = 0;
};

/// Main-memory table store for one partition: public, stream and window
/// tables. Single-threaded; owned by the partition executor.
class Database {
public:
    Database() = default;
    Database(const Database&) = default;
    Database& operator=(const Database&) = default;
    Database(Database&&) = default;
    Database& operator=(Database&&) = default;

    void create_public(const std::string& name, Schema schema, std::vector<std::string> indexed_columns = {});
    void create_stream(const std::string& name, Schema schema);
    void create_window(const WindowSpec& spec, Schema schema);

    bool has_table(std::string_view name) const;
    TableKind kind_of(std::string_view name) const;
    const Schema& schema_of(std::string_view name) const;

    /// Inserts one row. Streams require meta.batch_id; a zero tuple_id is
    /// assigned from the stream's sequence. Window inserts go through
    /// window_insert and discard the events.
    void insert(std::string_view table, Tuple t, const Caller& caller, UndoBuffer* undo);

    std::vector<Tuple> select_where(std::string_view table, const Predicate& p, const Caller& caller) const;
    std::size_t delete_where(std::string_view table, const Predicate& p, const Caller& caller, UndoBuffer* undo);
    std::vector<std::vector<Value>> aggregate(std::string_view table, AggOp op, std::string_view column,
                                              std::optional<std::string_view> group_by, const Caller& caller) const;
    std::vector<FullWindowEvent> window_insert(std::string_view window, std::span<const Tuple> batch,
                                               const Caller& caller, UndoBuffer* undo);

    /// Appends `rows` to a stream as (part of) batch `batch_id`, assigning
    /// tuple ids. Returns the stored tuples.
    std::vector<Tuple> append_to_stream(std::string_view stream, BatchId batch_id, std::vector<std::vector<Value>> rows,
                                        std::int64_t ts, UndoBuffer* undo);

    /// Removes every tuple of `batch_id`; idempotent.
    std::size_t garbage_collect(std::string_view stream, BatchId batch_id, UndoBuffer* undo = nullptr);

    const std::vector<Tuple>* stream_batch(std::string_view stream, BatchId batch_id) const;
    std::vector<BatchId> pending_batches(std::string_view stream) const;
    bool stream_empty(std::string_view stream) const;

    void rollback(UndoBuffer& undo);

    const PublicTable& public_table(std::string_view name) const;
    const StreamTable& stream_table(std::string_view name) const;
    const WindowTable& window_table(std::string_view name) const;
    /// Test hook: reads a window without the owner check but still traces.
    const WindowTable& unchecked_window(std::string_view name, const Caller& caller);

    std::vector<std::string> table_names() const;

    Progress& progress() { return progress_; }
    const Progress& progress() const { return progress_; }

    void set_access_tracing(bool on) { tracing_ = on; }
    const std::vector<WindowAccess>& access_trace() const { return trace_; }
    void clear_access_trace() { trace_.clear(); }

    /// Serialised full state (tables and progress) in the snapshot file format.
    std::vector<std::uint8_t> snapshot_state(std::uint32_t partition, CommitSeq commit_seq) const;
    /// Replaces this database's contents. Throws CorruptSnapshot or VersionMismatch.
    SnapshotHeader restore_state(std::span<const std::uint8_t> blob);

    bool operator==(const Database& o) const {
        return publics_ == o.publics_ && streams_ == o.streams_ && windows_ == o.windows_ && progress_ == o.progress_;
    }

private:
    PublicTable& public_mut(std::string_view name);
    StreamTable& stream_mut(std::string_view name);
    WindowTable& window_for(std::string_view name, const Caller& caller, bool write) const;

    std::map<std::string, PublicTable, std::less<>> publics_;
    std::map<std::string, StreamTable, std::less<>> streams_;
    mutable std::map<std::string, WindowTable, std::less<>> windows_;
    Progress progress_;
    bool tracing_ = false;
    mutable std::vector<WindowAccess> trace_;
};

inline constexpr std::string_view kSnapshotMagic = "STXSNAP1";
inline constexpr std::uint32_t kSnapshotVersion = 1;

} // namespace streamtx
