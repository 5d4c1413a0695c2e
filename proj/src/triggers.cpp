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

#include <algorithm>

#include "streamtx/codec.hpp"
#include "streamtx/context.hpp"
#include "streamtx/error.hpp"

namespace streamtx {

std::map<std::string, std::uint64_t> CounterValues::as_map() const {
    return {{"te_committed", te_committed},
            {"te_aborted", te_aborted},
            {"client_roundtrips", client_roundtrips},
            {"pe_dispatches", pe_dispatches},
            {"trigger_dispatches", trigger_dispatches},
            {"ee_statement_executions", ee_statement_executions},
            {"boundary_crossings", boundary_crossings},
            {"log_records", log_records},
            {"log_abort_records", log_abort_records},
            {"sync_count", sync_count},
            {"timer_flushes", timer_flushes},
            {"recovery_replays", recovery_replays},
            {"input_cache_appends", input_cache_appends},
            {"max_concurrent_te", max_concurrent_te}};
}

CounterValues CounterValues::operator-(const CounterValues& o) const {
    CounterValues d;
    d.te_committed = te_committed - o.te_committed;
    d.te_aborted = te_aborted - o.te_aborted;
    d.client_roundtrips = client_roundtrips - o.client_roundtrips;
    d.pe_dispatches = pe_dispatches - o.pe_dispatches;
    d.trigger_dispatches = trigger_dispatches - o.trigger_dispatches;
    d.ee_statement_executions = ee_statement_executions - o.ee_statement_executions;
    d.boundary_crossings = boundary_crossings - o.boundary_crossings;
    d.log_records = log_records - o.log_records;
    d.log_abort_records = log_abort_records - o.log_abort_records;
    d.sync_count = sync_count - o.sync_count;
    d.timer_flushes = timer_flushes - o.timer_flushes;
    d.recovery_replays = recovery_replays - o.recovery_replays;
    d.input_cache_appends = input_cache_appends - o.input_cache_appends;
    d.max_concurrent_te = max_concurrent_te;
    return d;
}

CounterValues Counters::load() const {
    CounterValues v;
    v.te_committed = te_committed.load();
    v.te_aborted = te_aborted.load();
    v.client_roundtrips = client_roundtrips.load();
    v.pe_dispatches = pe_dispatches.load();
    v.trigger_dispatches = trigger_dispatches.load();
    v.ee_statement_executions = ee_statement_executions.load();
    v.boundary_crossings = boundary_crossings.load();
    v.log_records = log_records.load();
    v.log_abort_records = log_abort_records.load();
    v.sync_count = sync_count.load();
    v.timer_flushes = timer_flushes.load();
    v.recovery_replays = recovery_replays.load();
    v.input_cache_appends = input_cache_appends.load();
    v.max_concurrent_te = max_concurrent_te.load();
    return v;
}

std::vector<std::uint8_t> encode_args(const ProcArgs& a) {
    ByteWriter w;
    w.values(a.values);
    w.u8(a.batch ? 1 : 0);
    if (a.batch) w.batch(*a.batch);
    return std::move(w.buffer());
}

ProcArgs decode_args(std::span<const std::uint8_t> blob) {
    ProcArgs a;
    if (blob.empty()) return a;
    ByteReader r(blob);
    a.values = r.values();
    if (r.u8()) a.batch = r.batch();
    if (!r.done()) fail(ErrorCode::CorruptLogRecord, "trailing bytes in argument blob");
    return a;
}

// ---------------------------------------------------------------------------
// StatementEngine

void StatementEngine::append(std::string_view stream, BatchId batch_id, std::vector<std::vector<Value>> rows,
                             std::int64_t ts, const Caller& caller, UndoBuffer& undo) {
    if (rows.empty()) return;
    auto stored = db_.append_to_stream(stream, batch_id, std::move(rows), ts, &undo);
    fire(stream, stored, batch_id, caller, undo);
}

void StatementEngine::append_tuples(std::string_view stream, BatchId batch_id, std::span<const Tuple> tuples,
                                    const Caller& caller, UndoBuffer& undo) {
    if (tuples.empty()) return;
    std::vector<Tuple> stored;
    stored.reserve(tuples.size());
    for (const auto& t : tuples) {
        auto one = db_.append_to_stream(stream, batch_id, {t.values}, t.meta.ts, &undo);
        stored.push_back(std::move(one.front()));
    }
    fire(stream, stored, batch_id, caller, undo);
}

std::vector<FullWindowEvent> StatementEngine::window_insert(std::string_view window, std::span<const Tuple> tuples,
                                                            const Caller& caller, UndoBuffer& undo) {
    auto events = db_.window_insert(window, tuples, caller, &undo);
    for (const auto& ev : events) fire_window_event(ev, caller, undo);
    return events;
}

void StatementEngine::write_rows(std::string_view dst, BatchId batch_id, std::span<const Tuple> tuples,
                                 const Caller& caller, UndoBuffer& undo) {
    switch (db_.kind_of(dst)) {
    case TableKind::Stream: append_tuples(dst, batch_id, tuples, caller, undo); break;
    case TableKind::Window: window_insert(dst, tuples, caller, undo); break;
    default:
        for (const auto& t : tuples) db_.insert(dst, Tuple{t.values, {0, batch_id, t.meta.ts}}, caller, &undo);
        break;
    }
}

void StatementEngine::fire(std::string_view source, std::span<const Tuple> tuples, BatchId batch_id,
                           const Caller& caller, UndoBuffer& undo) {
    const auto& programs = catalog_.triggers_on(source);
    if (programs.empty()) return;
    // The span may alias the stream's storage, which the programs can modify.
    std::vector<Tuple> batch(tuples.begin(), tuples.end());
    for (const auto* trig : programs) {
        for (const auto& st : trig->program) {
            ++counters_.ee_statement_executions;
            std::visit(
                [&](const auto& s) {
                    using S = std::decay_t<decltype(s)>;
                    if constexpr (std::is_same_v<S, FilteredCopy>) {
                        BoundPredicate bp(s.predicate, db_.schema_of(s.src));
                        std::vector<Tuple> hits;
                        for (const auto& t : batch)
                            if (bp.matches(t)) hits.push_back(t);
                        write_rows(s.dst, batch_id, hits, caller, undo);
                    } else if constexpr (std::is_same_v<S, WindowInsertStmt>) {
                        window_insert(s.window, batch, caller, undo);
                    } else if constexpr (std::is_same_v<S, DeleteBatch>) {
                        db_.garbage_collect(s.src, batch_id, &undo);
                    }
                },
                st);
        }
    }
    // A stream fed only to statement programs is consumed once they ran.
    if (db_.kind_of(source) == TableKind::Stream && catalog_.workflow().consumer_of(source).empty())
        db_.garbage_collect(source, batch_id, &undo);
}

void StatementEngine::fire_window_event(const FullWindowEvent& ev, const Caller& caller, UndoBuffer& undo) {
    const auto& programs = catalog_.triggers_on(ev.window);
    for (const auto* trig : programs) {
        for (const auto& st : trig->program) {
            const auto* agg = std::get_if<AggregateInsert>(&st);
            if (!agg) continue;
            ++counters_.ee_statement_executions;
            const auto& schema = db_.window_table(ev.window).schema();
            std::optional<std::string_view> grp;
            if (agg->group_by) grp = *agg->group_by;
            auto rows = aggregate_rows(ev.contents, schema, agg->op, agg->column, grp);
            std::int64_t ts = ev.contents.empty() ? 0 : ev.contents.back().meta.ts;
            std::vector<Tuple> out;
            for (auto& r : rows) out.push_back(Tuple{std::move(r), {0, caller.round, ts}});
            write_rows(agg->dst, caller.round, out, caller, undo);
        }
    }
}

// ---------------------------------------------------------------------------
// ProcContext

const std::vector<Tuple>& ProcContext::input(std::string_view stream) const {
    static const std::vector<Tuple> empty;
    ++counters_.boundary_crossings;
    if (std::find(def_.stream_inputs.begin(), def_.stream_inputs.end(), stream) == def_.stream_inputs.end())
        fail(ErrorCode::UnknownStream, std::string(stream) + " is not an input of " + def_.name);
    const auto* b = db_.stream_batch(stream, round_);
    return b ? *b : empty;
}

const std::vector<Tuple>& ProcContext::input() const {
    if (def_.stream_inputs.empty()) fail(ErrorCode::WrongKind, def_.name + " has no input stream");
    return input(def_.stream_inputs.front());
}

std::vector<Tuple> ProcContext::select(std::string_view table, const Predicate& p) {
    ++counters_.boundary_crossings;
    return db_.select_where(table, p, caller());
}

void ProcContext::insert(std::string_view table, std::vector<Value> values, std::int64_t ts) {
    ++counters_.boundary_crossings;
    auto kind = db_.kind_of(table);
    if (kind == TableKind::Stream) {
        stmts_.append(table, round_, {std::move(values)}, ts, caller(), undo_);
    } else if (kind == TableKind::Window) {
        std::vector<Tuple> one{Tuple{std::move(values), {0, round_, ts}}};
        stmts_.window_insert(table, one, caller(), undo_);
    } else {
        db_.insert(table, Tuple{std::move(values), {0, round_, ts}}, caller(), &undo_);
    }
}

std::size_t ProcContext::erase(std::string_view table, const Predicate& p) {
    ++counters_.boundary_crossings;
    return db_.delete_where(table, p, caller(), &undo_);
}

std::vector<std::vector<Value>> ProcContext::aggregate(std::string_view table, AggOp op, std::string_view column,
                                                       std::optional<std::string_view> group_by) {
    ++counters_.boundary_crossings;
    return db_.aggregate(table, op, column, group_by, caller());
}

std::vector<FullWindowEvent> ProcContext::window_insert(std::string_view window, std::span<const Tuple> tuples) {
    ++counters_.boundary_crossings;
    return stmts_.window_insert(window, tuples, caller(), undo_);
}

void ProcContext::emit(std::string_view stream, std::vector<std::vector<Value>> rows, std::int64_t ts) {
    ++counters_.boundary_crossings;
    if (std::find(def_.stream_outputs.begin(), def_.stream_outputs.end(), stream) == def_.stream_outputs.end())
        fail(ErrorCode::UnknownStream, std::string(stream) + " is not an output of " + def_.name);
    stmts_.append(stream, round_, std::move(rows), ts, caller(), undo_);
}

void ProcContext::abort(const std::string& reason) { fail(ErrorCode::BodyAbort, reason); }

} // namespace streamtx
