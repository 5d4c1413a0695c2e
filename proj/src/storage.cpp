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

#include "streamtx/storage.hpp"

#include <algorithm>

#include "streamtx/codec.hpp"
#include "streamtx/error.hpp"

namespace streamtx {

std::string_view to_string(TableKind k) {
    switch (k) {
    case TableKind::Public: return "public";
    case TableKind::Stream: return "stream";
    case TableKind::Window: return "window";
    case TableKind::Progress: return "progress";
    }
    return "?";
}

std::string_view to_string(AggOp op) {
    switch (op) {
    case AggOp::Count: return "count";
    case AggOp::Sum: return "sum";
    case AggOp::Avg: return "avg";
    case AggOp::Min: return "min";
    case AggOp::Max: return "max";
    }
    return "?";
}

std::optional<AggOp> parse_agg_op(std::string_view s) {
    if (s == "count") return AggOp::Count;
    if (s == "sum") return AggOp::Sum;
    if (s == "avg") return AggOp::Avg;
    if (s == "min") return AggOp::Min;
    if (s == "max") return AggOp::Max;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// PublicTable

PublicTable::PublicTable(std::string name, Schema schema, std::vector<std::string> indexed_columns)
    : name_(std::move(name)), schema_(std::move(schema)), indexed_names_(std::move(indexed_columns)) {
    for (const auto& c : indexed_names_) indexes_[schema_.require(c)];
}

void PublicTable::index_add(RowId id, const Tuple& t) {
    for (auto& [col, idx] : indexes_) idx[t.values[col]].push_back(id);
}

void PublicTable::index_remove(RowId id, const Tuple& t) {
    for (auto& [col, idx] : indexes_) {
        auto it = idx.find(t.values[col]);
        if (it == idx.end()) continue;
        auto& ids = it->second;
        ids.erase(std::remove(ids.begin(), ids.end(), id), ids.end());
        if (ids.empty()) idx.erase(it);
    }
}

RowId PublicTable::insert(Tuple t) {
    RowId id = next_rowid_++;
    index_add(id, t);
    rows_.emplace(id, std::move(t));
    return id;
}

void PublicTable::erase(RowId id) {
    auto it = rows_.find(id);
    if (it == rows_.end()) return;
    index_remove(id, it->second);
    rows_.erase(it);
}

void PublicTable::reinsert(RowId id, Tuple t) {
    index_add(id, t);
    rows_.emplace(id, std::move(t));
}

std::vector<RowId> PublicTable::scan(const BoundPredicate& p) const {
    std::vector<RowId> out;
    for (const auto& [id, row] : rows_)
        if (p.matches(row)) out.push_back(id);
    return out;
}

std::vector<RowId> PublicTable::match(const BoundPredicate& p) const {
    if (auto probe = p.equality_probe()) {
        auto idx = indexes_.find(probe->first);
        if (idx != indexes_.end() && type_of(*probe->second) == schema_.columns()[probe->first].type) {
            std::vector<RowId> out;
            auto it = idx->second.find(*probe->second);
            if (it == idx->second.end()) return out;
            for (auto id : it->second)
                if (p.matches(rows_.at(id))) out.push_back(id);
            std::sort(out.begin(), out.end());
            return out;
        }
    }
    return scan(p);
}

// ---------------------------------------------------------------------------
// Aggregation

namespace {

Value add(const Value& a, const Value& b) {
    if (type_of(a) == ScalarType::Int && type_of(b) == ScalarType::Int)
        return std::get<std::int64_t>(a) + std::get<std::int64_t>(b);
    auto d = [](const Value& v) {
        return type_of(v) == ScalarType::Int ? static_cast<double>(std::get<std::int64_t>(v)) : std::get<double>(v);
    };
    return d(a) + d(b);
}

double as_double(const Value& v) {
    return type_of(v) == ScalarType::Int ? static_cast<double>(std::get<std::int64_t>(v)) : std::get<double>(v);
}

struct ValueLess {
    bool operator()(const Value& a, const Value& b) const {
        auto c = compare_values(a, b);
        return c ? *c < 0 : a.index() < b.index();
    }
};

} // namespace

std::vector<std::vector<Value>> aggregate_rows(std::span<const Tuple> rows, const Schema& schema, AggOp op,
                                               std::string_view column, std::optional<std::string_view> group_by) {
    std::optional<std::size_t> col;
    if (op != AggOp::Count || (!column.empty() && column != "*")) {
        col = schema.require(column);
        if (op != AggOp::Count && schema.columns()[*col].type == ScalarType::Text)
            fail(ErrorCode::TypeMismatch, std::string(to_string(op)) + " over text column " + std::string(column));
    }
    std::optional<std::size_t> grp;
    if (group_by) grp = schema.require(*group_by);

    struct Acc {
        std::int64_t count = 0;
        std::optional<Value> sum, min, max;
    };
    std::map<Value, Acc, ValueLess> groups;
    for (const auto& r : rows) {
        auto& acc = groups[grp ? r.values[*grp] : Value{std::int64_t{0}}];
        ++acc.count;
        if (!col || op == AggOp::Count) continue;
        const auto& v = r.values[*col];
        acc.sum = acc.sum ? add(*acc.sum, v) : v;
        if (!acc.min || ValueLess{}(v, *acc.min)) acc.min = v;
        if (!acc.max || ValueLess{}(*acc.max, v)) acc.max = v;
    }

    std::vector<std::vector<Value>> out;
    if (groups.empty()) {
        if (op == AggOp::Count && !grp) out.push_back({std::int64_t{0}});
        return out;
    }
    for (const auto& [key, acc] : groups) {
        Value result;
        switch (op) {
        case AggOp::Count: result = acc.count; break;
        case AggOp::Sum: result = *acc.sum; break;
        case AggOp::Avg: result = as_double(*acc.sum) / static_cast<double>(acc.count); break;
        case AggOp::Min: result = *acc.min; break;
        case AggOp::Max: result = *acc.max; break;
        }
        if (grp) out.push_back({key, result});
        else out.push_back({result});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Database

void Database::create_public(const std::string& name, Schema schema, std::vector<std::string> indexed_columns) {
    if (has_table(name)) fail(ErrorCode::DuplicateName, name);
    publics_.emplace(name, PublicTable(name, std::move(schema), std::move(indexed_columns)));
}

void Database::create_stream(const std::string& name, Schema schema) {
    if (has_table(name)) fail(ErrorCode::DuplicateName, name);
    streams_.emplace(name, StreamTable(name, std::move(schema)));
}

void Database::create_window(const WindowSpec& spec, Schema schema) {
    if (has_table(spec.name)) fail(ErrorCode::DuplicateName, spec.name);
    if (spec.size < 1 || spec.slide < 1 || spec.slide > spec.size)
        fail(ErrorCode::InvalidWorkflow, "window " + spec.name + " needs 1 <= slide <= size");
    windows_.emplace(spec.name, WindowTable(spec, std::move(schema)));
}

bool Database::has_table(std::string_view name) const {
    return publics_.count(name) || streams_.count(name) || windows_.count(name);
}

TableKind Database::kind_of(std::string_view name) const {
    if (publics_.count(name)) return TableKind::Public;
    if (streams_.count(name)) return TableKind::Stream;
    if (windows_.count(name)) return TableKind::Window;
    fail(ErrorCode::UnknownTable, std::string(name));
}

const Schema& Database::schema_of(std::string_view name) const {
    switch (kind_of(name)) {
    case TableKind::Public: return publics_.find(name)->second.schema();
    case TableKind::Stream: return streams_.find(name)->second.schema();
    default: return windows_.find(name)->second.schema();
    }
}

PublicTable& Database::public_mut(std::string_view name) {
    auto it = publics_.find(name);
    if (it == publics_.end()) fail(ErrorCode::UnknownTable, std::string(name));
    return it->second;
}

StreamTable& Database::stream_mut(std::string_view name) {
    auto it = streams_.find(name);
    if (it == streams_.end()) fail(ErrorCode::UnknownTable, std::string(name));
    return it->second;
}

const PublicTable& Database::public_table(std::string_view name) const {
    auto it = publics_.find(name);
    if (it == publics_.end()) fail(ErrorCode::UnknownTable, std::string(name));
    return it->second;
}

const StreamTable& Database::stream_table(std::string_view name) const {
    auto it = streams_.find(name);
    if (it == streams_.end()) fail(ErrorCode::UnknownTable, std::string(name));
    return it->second;
}

const WindowTable& Database::window_table(std::string_view name) const {
    auto it = windows_.find(name);
    if (it == windows_.end()) fail(ErrorCode::UnknownTable, std::string(name));
    return it->second;
}

WindowTable& Database::window_for(std::string_view name, const Caller& caller, bool write) const {
    auto it = windows_.find(name);
    if (it == windows_.end()) fail(ErrorCode::UnknownTable, std::string(name));
    if (tracing_)
        trace_.push_back({std::string(caller.procedure), caller.round, it->first, it->second.spec().owner, write});
    if (caller.procedure != it->second.spec().owner)
        fail(ErrorCode::WindowScopeViolation,
             "window " + it->first + " is owned by " + it->second.spec().owner + ", not '" +
                 std::string(caller.procedure) + "'");
    return it->second;
}

const WindowTable& Database::unchecked_window(std::string_view name, const Caller& caller) {
    auto it = windows_.find(name);
    if (it == windows_.end()) fail(ErrorCode::UnknownTable, std::string(name));
    if (tracing_)
        trace_.push_back({std::string(caller.procedure), caller.round, it->first, it->second.spec().owner, false});
    return it->second;
}

void Database::insert(std::string_view table, Tuple t, const Caller& caller, UndoBuffer* undo) {
    switch (kind_of(table)) {
    case TableKind::Public: {
        auto& tab = public_mut(table);
        tab.schema().check(t.values);
        RowId prev = tab.next_rowid();
        RowId id = tab.insert(std::move(t));
        if (undo) undo->record(UndoBuffer::PublicInserted{tab.name(), id, prev});
        return;
    }
    case TableKind::Stream: {
        auto& s = stream_mut(table);
        s.schema().check(t.values);
        TupleId prev = s.next_tuple_id();
        if (t.meta.tuple_id == 0) t.meta.tuple_id = prev;
        else if (t.meta.tuple_id < prev)
            fail(ErrorCode::TypeMismatch, "tuple_id not increasing on stream " + s.name());
        s.set_next_tuple_id(t.meta.tuple_id + 1);
        BatchId b = t.meta.batch_id;
        s.mutable_batches()[b].push_back(std::move(t));
        if (undo) undo->record(UndoBuffer::StreamInserted{s.name(), b, prev});
        return;
    }
    case TableKind::Window: {
        std::vector<Tuple> one{std::move(t)};
        window_insert(table, one, caller, undo);
        return;
    }
    default: break;
    }
}

std::vector<Tuple> Database::select_where(std::string_view table, const Predicate& p, const Caller& caller) const {
    std::vector<Tuple> out;
    switch (kind_of(table)) {
    case TableKind::Public: {
        const auto& tab = public_table(table);
        BoundPredicate bp(p, tab.schema());
        for (auto id : tab.match(bp)) out.push_back(tab.rows().at(id));
        break;
    }
    case TableKind::Stream: {
        const auto& s = stream_table(table);
        BoundPredicate bp(p, s.schema());
        for (const auto& [b, rows] : s.batches())
            for (const auto& r : rows)
                if (bp.matches(r)) out.push_back(r);
        break;
    }
    case TableKind::Window: {
        const auto& w = window_for(table, caller, false);
        BoundPredicate bp(p, w.schema());
        for (const auto& r : w.active())
            if (bp.matches(r)) out.push_back(r);
        break;
    }
    default: break;
    }
    return out;
}

std::size_t Database::delete_where(std::string_view table, const Predicate& p, const Caller& caller,
                                   UndoBuffer* undo) {
    switch (kind_of(table)) {
    case TableKind::Public: {
        auto& tab = public_mut(table);
        BoundPredicate bp(p, tab.schema());
        auto ids = tab.match(bp);
        for (auto id : ids) {
            if (undo) undo->record(UndoBuffer::PublicDeleted{tab.name(), id, tab.rows().at(id)});
            tab.erase(id);
        }
        return ids.size();
    }
    case TableKind::Stream: {
        auto& s = stream_mut(table);
        BoundPredicate bp(p, s.schema());
        std::size_t n = 0;
        auto& batches = s.mutable_batches();
        for (auto it = batches.begin(); it != batches.end();) {
            auto& rows = it->second;
            std::vector<Tuple> kept;
            kept.reserve(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (bp.matches(rows[i])) {
                    // Position is relative to the rows kept so far, which is
                    // where undo (applied in reverse) must put it back.
                    if (undo) undo->record(UndoBuffer::StreamDeleted{s.name(), it->first, kept.size(), rows[i]});
                    ++n;
                } else {
                    kept.push_back(std::move(rows[i]));
                }
            }
            if (kept.empty()) it = batches.erase(it);
            else {
                rows = std::move(kept);
                ++it;
            }
        }
        return n;
    }
    case TableKind::Window: {
        // Windows only change through slides.
        window_for(table, caller, true);
        fail(ErrorCode::TypeMismatch, "delete is not supported on window " + std::string(table));
    }
    default: break;
    }
    return 0;
}

std::vector<std::vector<Value>> Database::aggregate(std::string_view table, AggOp op, std::string_view column,
                                                    std::optional<std::string_view> group_by,
                                                    const Caller& caller) const {
    switch (kind_of(table)) {
    case TableKind::Public: {
        const auto& tab = public_table(table);
        std::vector<Tuple> rows;
        rows.reserve(tab.rows().size());
        for (const auto& [id, r] : tab.rows()) rows.push_back(r);
        return aggregate_rows(rows, tab.schema(), op, column, group_by);
    }
    case TableKind::Stream: {
        auto rows = select_where(table, Predicate::all(), caller);
        return aggregate_rows(rows, schema_of(table), op, column, group_by);
    }
    case TableKind::Window: {
        const auto& w = window_for(table, caller, false);
        std::vector<Tuple> rows(w.active().begin(), w.active().end());
        return aggregate_rows(rows, w.schema(), op, column, group_by);
    }
    default: break;
    }
    return {};
}

std::vector<FullWindowEvent> Database::window_insert(std::string_view window, std::span<const Tuple> batch,
                                                     const Caller& caller, UndoBuffer* undo) {
    auto& w = window_for(window, caller, true);
    for (const auto& t : batch) w.schema().check(t.values);
    if (!undo) return w.insert(batch, nullptr);
    UndoBuffer::WindowChanged rec{w.spec().name, {}};
    auto events = w.insert(batch, &rec.undo);
    undo->record(std::move(rec));
    return events;
}

std::vector<Tuple> Database::append_to_stream(std::string_view stream, BatchId batch_id,
                                              std::vector<std::vector<Value>> rows, std::int64_t ts,
                                              UndoBuffer* undo) {
    auto& s = stream_mut(stream);
    std::vector<Tuple> stored;
    stored.reserve(rows.size());
    for (auto& values : rows) {
        s.schema().check(values);
        TupleId prev = s.next_tuple_id();
        Tuple t{std::move(values), TupleMeta{prev, batch_id, ts}};
        s.set_next_tuple_id(prev + 1);
        s.mutable_batches()[batch_id].push_back(t);
        if (undo) undo->record(UndoBuffer::StreamInserted{s.name(), batch_id, prev});
        stored.push_back(std::move(t));
    }
    return stored;
}

std::size_t Database::garbage_collect(std::string_view stream, BatchId batch_id, UndoBuffer* undo) {
    auto& s = stream_mut(stream);
    auto& batches = s.mutable_batches();
    auto it = batches.find(batch_id);
    if (it == batches.end()) return 0;
    std::size_t n = it->second.size();
    if (undo)
        for (std::size_t i = n; i-- > 0;)
            undo->record(UndoBuffer::StreamDeleted{s.name(), batch_id, i, std::move(it->second[i])});
    batches.erase(it);
    return n;
}

const std::vector<Tuple>* Database::stream_batch(std::string_view stream, BatchId batch_id) const {
    const auto& s = stream_table(stream);
    auto it = s.batches().find(batch_id);
    return it == s.batches().end() ? nullptr : &it->second;
}

std::vector<BatchId> Database::pending_batches(std::string_view stream) const {
    std::vector<BatchId> out;
    for (const auto& [b, rows] : stream_table(stream).batches()) out.push_back(b);
    return out;
}

bool Database::stream_empty(std::string_view stream) const { return stream_table(stream).batches().empty(); }

void Database::rollback(UndoBuffer& undo) {
    auto& entries = undo.entries();
    for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
        std::visit(
            [this](auto& e) {
                using E = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<E, UndoBuffer::PublicInserted>) {
                    auto& t = public_mut(e.table);
                    t.erase(e.id);
                    t.set_next_rowid(e.prev_next_rowid);
                } else if constexpr (std::is_same_v<E, UndoBuffer::PublicDeleted>) {
                    public_mut(e.table).reinsert(e.id, std::move(e.row));
                } else if constexpr (std::is_same_v<E, UndoBuffer::StreamInserted>) {
                    auto& s = stream_mut(e.table);
                    auto& batches = s.mutable_batches();
                    auto b = batches.find(e.batch);
                    if (b != batches.end()) {
                        b->second.pop_back();
                        if (b->second.empty()) batches.erase(b);
                    }
                    s.set_next_tuple_id(e.prev_next_tuple_id);
                } else if constexpr (std::is_same_v<E, UndoBuffer::StreamDeleted>) {
                    auto& rows = stream_mut(e.table).mutable_batches()[e.batch];
                    rows.insert(rows.begin() + static_cast<std::ptrdiff_t>(e.position), std::move(e.row));
                } else {
                    windows_.find(e.table)->second.undo(e.undo);
                }
            },
            *it);
    }
    entries.clear();
}

std::vector<std::string> Database::table_names() const {
    std::vector<std::string> out;
    for (const auto& [n, t] : publics_) out.push_back(n);
    for (const auto& [n, t] : streams_) out.push_back(n);
    for (const auto& [n, t] : windows_) out.push_back(n);
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Snapshots

namespace {
constexpr std::string_view kProgressName = "__progress";
constexpr std::size_t kHeaderBytes = 8 + 4 + 4 + 8;
} // namespace

std::vector<std::uint8_t> Database::snapshot_state(std::uint32_t partition, CommitSeq commit_seq) const {
    ByteWriter w;
    w.raw(kSnapshotMagic);
    w.u32(kSnapshotVersion);
    w.u32(partition);
    w.u64(commit_seq);
    w.u32(static_cast<std::uint32_t>(publics_.size() + streams_.size() + windows_.size() + 1));

    for (const auto& [name, t] : publics_) {
        w.u8(static_cast<std::uint8_t>(TableKind::Public));
        w.str(name);
        w.schema(t.schema());
        w.u32(static_cast<std::uint32_t>(t.indexed_columns().size()));
        for (const auto& c : t.indexed_columns()) w.str(c);
        w.u64(t.next_rowid());
        w.u64(t.rows().size());
        for (const auto& [id, row] : t.rows()) {
            w.u64(id);
            w.tuple(row);
        }
    }
    for (const auto& [name, s] : streams_) {
        w.u8(static_cast<std::uint8_t>(TableKind::Stream));
        w.str(name);
        w.schema(s.schema());
        w.u64(s.next_tuple_id());
        std::uint64_t n = 0;
        for (const auto& [b, rows] : s.batches()) n += rows.size();
        w.u64(n);
        for (const auto& [b, rows] : s.batches())
            for (const auto& r : rows) w.tuple(r);
    }
    for (const auto& [name, win] : windows_) {
        w.u8(static_cast<std::uint8_t>(TableKind::Window));
        w.str(name);
        w.schema(win.schema());
        w.u64(win.spec().size);
        w.u64(win.spec().slide);
        w.str(win.spec().owner);
        w.u8(win.full_seen() ? 1 : 0);
        w.u64(win.active().size() + win.staged().size());
        w.u64(win.active().size());
        for (const auto& r : win.active()) w.tuple(r);
        for (const auto& r : win.staged()) w.tuple(r);
    }
    w.u8(static_cast<std::uint8_t>(TableKind::Progress));
    w.str(kProgressName);
    w.schema(Schema{});
    w.u64(progress_.last_round.size());
    for (const auto& [p, r] : progress_.last_round) {
        w.str(p);
        w.u64(r);
    }
    w.u64(progress_.dropped.size());
    for (const auto& [p, r] : progress_.dropped) {
        w.str(p);
        w.u64(r);
    }

    w.u32(crc32(w.buffer()));
    return std::move(w.buffer());
}

SnapshotHeader Database::restore_state(std::span<const std::uint8_t> blob) {
    if (blob.size() < kHeaderBytes + 4) fail(ErrorCode::CorruptSnapshot, "snapshot too short");
    auto body = blob.first(blob.size() - 4);
    ByteReader tail(blob.last(4));
    if (crc32(body) != tail.u32()) fail(ErrorCode::CorruptSnapshot, "checksum mismatch");

    ByteReader r(body);
    if (r.raw(8) != kSnapshotMagic) fail(ErrorCode::CorruptSnapshot, "bad magic");
    SnapshotHeader h;
    h.version = r.u32();
    if (h.version != kSnapshotVersion)
        fail(ErrorCode::VersionMismatch, "snapshot version " + std::to_string(h.version));
    h.partition = r.u32();
    h.commit_seq = r.u64();

    Database db;
    db.tracing_ = tracing_;
    auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        auto kind = r.u8();
        auto name = r.str();
        auto schema = r.schema();
        switch (static_cast<TableKind>(kind)) {
        case TableKind::Public: {
            std::vector<std::string> idx(r.u32());
            for (auto& c : idx) c = r.str();
            PublicTable t(name, schema, idx);
            t.set_next_rowid(r.u64());
            auto n = r.u64();
            for (std::uint64_t k = 0; k < n; ++k) {
                auto id = r.u64();
                t.reinsert(id, r.tuple());
            }
            db.publics_.emplace(name, std::move(t));
            break;
        }
        case TableKind::Stream: {
            StreamTable s(name, schema);
            s.set_next_tuple_id(r.u64());
            auto n = r.u64();
            for (std::uint64_t k = 0; k < n; ++k) {
                auto t = r.tuple();
                s.mutable_batches()[t.meta.batch_id].push_back(std::move(t));
            }
            db.streams_.emplace(name, std::move(s));
            break;
        }
        case TableKind::Window: {
            WindowSpec spec;
            spec.name = name;
            spec.size = r.u64();
            spec.slide = r.u64();
            spec.owner = r.str();
            bool full = r.u8() != 0;
            auto total = r.u64();
            auto active_n = r.u64();
            if (active_n > total) fail(ErrorCode::CorruptSnapshot, "window counts");
            std::deque<Tuple> active, staged;
            for (std::uint64_t k = 0; k < total; ++k) (k < active_n ? active : staged).push_back(r.tuple());
            WindowTable w(spec, schema);
            w.restore(std::move(active), std::move(staged), full);
            db.windows_.emplace(name, std::move(w));
            break;
        }
        case TableKind::Progress: {
            auto n = r.u64();
            for (std::uint64_t k = 0; k < n; ++k) {
                auto p = r.str();
                db.progress_.last_round[p] = r.u64();
            }
            n = r.u64();
            for (std::uint64_t k = 0; k < n; ++k) {
                auto p = r.str();
                db.progress_.dropped.emplace(p, r.u64());
            }
            break;
        }
        default: fail(ErrorCode::CorruptSnapshot, "unknown table kind");
        }
    }
    if (!r.done()) fail(ErrorCode::CorruptSnapshot, "trailing bytes");
    *this = std::move(db);
    return h;
}

} // namespace streamtx
