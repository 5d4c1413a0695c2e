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

#include "streamtx/partition.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>

#include "streamtx/codec.hpp"

namespace streamtx {

std::string_view to_string(Origin o) {
    switch (o) {
    case Origin::Client: return "client";
    case Origin::Trigger: return "trigger";
    case Origin::Recovery: return "recovery";
    }
    return "?";
}

Partition::Partition(std::shared_ptr<const Catalog> catalog, PartitionOptions opts)
    : catalog_(std::move(catalog)), opts_(std::move(opts)), db_(catalog_->build_database()),
      stmts_(*catalog_, db_, counters_) {
    db_.set_access_tracing(opts_.trace_windows);
    if (opts_.mode != RecoveryMode::None) {
        if (opts_.dir.empty()) fail(ErrorCode::IOFailure, "logging needs a directory");
        std::filesystem::create_directories(opts_.dir);
        log_ = std::make_unique<CommandLog>(log_path(), opts_.mode, opts_.id, opts_.group_commit, opts_.faults,
                                            opts_.sync, counters_);
        if (opts_.mode == RecoveryMode::Weak)
            cache_ = std::make_unique<InputCache>(input_cache_path(), opts_.id, opts_.sync, counters_);
    }
}

Partition::~Partition() {
    stop();
    if (!crashed_ && !halted_) {
        try {
            flush_log();
        } catch (...) {
        }
    }
    std::lock_guard lk(mu_);
    for (auto& w : client_q_)
        if (w.ticket) w.ticket->set_value(Outcome{false, ErrorCode::EngineStopped, "partition destroyed", 0, {}});
    for (auto& [p, o] : pending_acks_) p->set_value(Outcome{false, ErrorCode::EngineStopped, "not durable", 0, {}});
}

// ---------------------------------------------------------------------------
// Queues

Ticket Partition::submit_client(TERequest req) {
    if (crashed_ || halted_) fail(ErrorCode::EngineStopped, "partition " + std::to_string(opts_.id) + " is down");
    if (!workflow().contains(req.procedure) && !workflow().find_group(req.procedure))
        fail(ErrorCode::UnknownProcedure, req.procedure);
    auto promise = std::make_shared<std::promise<Outcome>>();
    Ticket t = promise->get_future().share();
    {
        std::unique_lock lk(mu_);
        if (opts_.queue_bound > 0 && thread_.joinable())
            space_cv_.wait(lk, [&] { return client_q_.size() < opts_.queue_bound || stop_; });
        req.origin = req.origin == Origin::Recovery ? Origin::Recovery : Origin::Client;
        client_q_.push_back({std::move(req), std::move(promise)});
        ++counters_.client_roundtrips;
    }
    work_cv_.notify_one();
    return t;
}

bool Partition::has_work_locked() const { return !fast_.empty() || (!paused_ && !client_q_.empty()); }

std::optional<ScheduledWork> Partition::pop_locked() {
    if (!fast_.empty()) {
        auto it = fast_.begin();
        ScheduledWork w{std::move(it->second), nullptr};
        fast_.erase(it);
        return w;
    }
    if (!paused_ && !client_q_.empty()) {
        auto w = std::move(client_q_.front());
        client_q_.pop_front();
        space_cv_.notify_one();
        return w;
    }
    return std::nullopt;
}

std::optional<ScheduledWork> Partition::schedule_next() {
    std::lock_guard lk(mu_);
    return pop_locked();
}

std::vector<TERequest> Partition::fast_track_contents() const {
    std::lock_guard lk(mu_);
    std::vector<TERequest> out;
    for (const auto& [k, r] : fast_) out.push_back(r);
    return out;
}

std::size_t Partition::client_queue_depth() const {
    std::lock_guard lk(mu_);
    return client_q_.size();
}

void Partition::enqueue_trigger(const std::string& procedure, Round round) {
    if (!pe_triggers_) return;
    std::lock_guard lk(mu_);
    fast_.emplace(FastKey{round, workflow().order_index(procedure), procedure},
                  TERequest{procedure, round, {}, Origin::Trigger});
}

// ---------------------------------------------------------------------------
// Execution

void Partition::note_running(int delta) {
    if (delta > 0) {
        auto now = ++counters_.running_te;
        auto prev = counters_.max_concurrent_te.load();
        while (now > prev && !counters_.max_concurrent_te.compare_exchange_weak(prev, now)) {
        }
    } else {
        --counters_.running_te;
    }
}

void Partition::dispatch(ScheduledWork work) {
    if (crashed_ || halted_) {
        if (work.ticket) work.ticket->set_value(Outcome{false, ErrorCode::EngineStopped, "partition is down", 0, {}});
        return;
    }
    logged_last_ = false;
    Outcome out;
    try {
        out = execute_te(work.request);
    } catch (const SimulatedCrash&) {
        crashed_ = true;
        throw;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::LogWriteFailure || e.code() == ErrorCode::IOFailure) halted_ = true;
        if (work.ticket) work.ticket->set_value(abort_outcome(e));
        throw;
    }
    bool flush_now = false;
    {
        std::lock_guard lk(log_mu_);
        if (work.ticket) {
            if (out.committed && logged_last_) pending_acks_.emplace_back(std::move(work.ticket), out);
            else work.ticket->set_value(out);
        }
        flush_now = log_ && log_->batch_full();
    }
    if (flush_now) flush_log();
}

bool Partition::logs(const ProcedureDef& def) const {
    if (!log_ || replaying_) return false;
    if (opts_.mode == RecoveryMode::Strong) return true;
    return def.kind != ProcedureKind::Interior;
}

void Partition::log_record(LogRecord r) {
    std::lock_guard lk(log_mu_);
    log_->append(r);
    if (!r.is_abort()) logged_last_ = true;
}

Outcome Partition::abort_outcome(const Error& e) const {
    return Outcome{false, e.code(), e.what(), 0, {}};
}

std::optional<Outcome> Partition::check_runnable(const ProcedureDef& def, Round round, const ProcArgs& args,
                                                 bool head) const {
    auto reject = [](ErrorCode c, std::string why) { return Outcome{false, c, std::move(why), 0, {}}; };
    if (def.kind == ProcedureKind::Oltp) return std::nullopt;
    if (round == 0) return reject(ErrorCode::MissingInputBatch, def.name + " needs a round");
    const auto& progress = db_.progress();
    auto last = progress.last_round.find(def.name);
    if (last != progress.last_round.end() && round <= last->second)
        return reject(ErrorCode::MissingInputBatch, def.name + " already ran round " + std::to_string(last->second));
    if (progress.dropped.count({def.name, round}))
        return reject(ErrorCode::MissingInputBatch, def.name + " round " + std::to_string(round) + " was dropped");
    if (def.kind == ProcedureKind::Border) {
        if (!head) return reject(ErrorCode::WrongKind, def.name);
        if (!args.batch || args.batch->batch_id != round)
            return reject(ErrorCode::MissingInputBatch, def.name + " request carries no batch " + std::to_string(round));
        if (args.batch->tuples.empty()) return reject(ErrorCode::MissingInputBatch, "empty batch");
        return std::nullopt;
    }
    for (const auto& s : def.stream_inputs)
        if (!db_.stream_batch(s, round))
            return reject(ErrorCode::MissingInputBatch,
                          def.name + " has no batch " + std::to_string(round) + " on " + s);
    return std::nullopt;
}

std::vector<std::vector<Value>> Partition::run_one(const ProcedureDef& def, Round round, const ProcArgs& args,
                                                   UndoBuffer& undo) {
    ++counters_.pe_dispatches;
    note_running(+1);
    struct Done {
        Partition* p;
        ~Done() { p->note_running(-1); }
    } done{this};

    Caller caller{def.name, round};
    if (def.kind == ProcedureKind::Border) {
        const auto& in = def.stream_inputs.front();
        const auto& schema = db_.schema_of(in);
        for (const auto& t : args.batch->tuples) schema.check(t.values);
        stmts_.append_tuples(in, round, args.batch->tuples, caller, undo);
    }
    ProcContext ctx(def, round, args, db_, stmts_, undo, counters_);
    if (const auto& body = catalog_->body(def.name)) body(ctx);
    for (const auto& s : def.stream_inputs) db_.garbage_collect(s, round, &undo);
    return std::move(ctx.result());
}

void Partition::record_commit(const ProcedureDef& def, Round round, std::vector<std::uint8_t> args, CommitSeq seq) {
    schedule_.entries.push_back({def.name, round, std::move(args), seq});
    if (opts_.schedule_retention > 0 && schedule_.entries.size() > 2 * opts_.schedule_retention)
        schedule_.entries.erase(schedule_.entries.begin(),
                                schedule_.entries.end() - static_cast<std::ptrdiff_t>(opts_.schedule_retention));
    if (is_streaming(def.kind)) db_.progress().last_round[def.name] = round;
    ++counters_.te_committed;
}

Outcome Partition::execute_te(const TERequest& req) {
    if (crashed_ || halted_) fail(ErrorCode::EngineStopped, "partition is down");
    if (req.origin == Origin::Trigger) ++counters_.trigger_dispatches;
    if (req.origin == Origin::Recovery) ++counters_.recovery_replays;

    const auto* def = workflow().find(req.procedure);
    if (!def) {
        if (const auto* g = workflow().find_group(req.procedure)) {
            TERequest head = req;
            head.procedure = g->execution_order.front();
            return execute_nested(*g, head);
        }
        fail(ErrorCode::UnknownProcedure, req.procedure);
    }
    if (const auto* g = workflow().group_of(def->name)) {
        if (g->execution_order.front() == def->name) return execute_nested(*g, req);
        return Outcome{false, ErrorCode::WrongKind, def->name + " only runs inside nested group " + g->parent_name, 0,
                       {}};
    }

    ProcArgs args = decode_args(req.args);
    if (auto reject = check_runnable(*def, req.round, args, true)) return *reject;

    UndoBuffer undo;
    std::vector<std::vector<Value>> result;
    try {
        result = run_one(*def, req.round, args, undo);
    } catch (const Error& e) {
        db_.rollback(undo);
        ++counters_.te_aborted;
        if (is_streaming(def->kind)) {
            apply_abort(def->name, req.round);
            if (logs(*def) && opts_.mode == RecoveryMode::Strong) log_record(LogRecord{0, def->name, req.round, {}});
        }
        return abort_outcome(e);
    }

    CommitSeq seq = next_seq_++;
    std::vector<std::uint8_t> logged_args =
        def->kind == ProcedureKind::Interior ? std::vector<std::uint8_t>{} : req.args;
    if (logs(*def)) log_record(LogRecord{seq, def->name, req.round, logged_args});
    record_commit(*def, req.round, logged_args, seq);
    for (const auto& s : def->stream_outputs) handle_output(*def, s, req.round, nullptr);
    if (observer_) observer_(schedule_.entries.back(), db_);
    return Outcome{true, std::nullopt, {}, seq, std::move(result)};
}

Outcome Partition::execute_nested(const NestedGroup& g, const TERequest& head_req) {
    const auto& head = workflow().get(g.execution_order.front());
    ProcArgs head_args = decode_args(head_req.args);
    if (auto reject = check_runnable(head, head_req.round, head_args, true)) return *reject;
    const Round r = head_req.round;

    UndoBuffer undo;
    std::vector<const ProcedureDef*> ran, skipped;
    std::vector<std::vector<Value>> result;
    try {
        for (const auto& name : g.execution_order) {
            const auto& def = workflow().get(name);
            if (&def == &head) {
                result = run_one(def, r, head_args, undo);
                ran.push_back(&def);
                continue;
            }
            if (check_runnable(def, r, {}, false)) {
                skipped.push_back(&def);
                continue;
            }
            run_one(def, r, {}, undo);
            ran.push_back(&def);
        }
    } catch (const Error& e) {
        db_.rollback(undo);
        ++counters_.te_aborted;
        apply_abort(head.name, r);
        if (logs(head) && opts_.mode == RecoveryMode::Strong) log_record(LogRecord{0, g.parent_name, r, {}});
        return abort_outcome(e);
    }

    const CommitSeq first = next_seq_;
    std::vector<std::uint8_t> logged_args =
        head.kind == ProcedureKind::Interior ? std::vector<std::uint8_t>{} : head_req.args;
    if (logs(head)) log_record(LogRecord{first, g.parent_name, r, logged_args});
    for (const auto* def : ran) record_commit(*def, r, def == &head ? logged_args : std::vector<std::uint8_t>{},
                                              next_seq_++);
    for (const auto* def : skipped) drop_round(def->name, r);
    for (const auto* def : ran)
        for (const auto& s : def->stream_outputs) handle_output(*def, s, r, &g);
    if (observer_)
        for (std::size_t i = schedule_.entries.size() - ran.size(); i < schedule_.entries.size(); ++i)
            observer_(schedule_.entries[i], db_);
    return Outcome{true, std::nullopt, {}, first, std::move(result)};
}

void Partition::handle_output(const ProcedureDef& producer, const std::string& stream, Round round,
                              const NestedGroup* skip_group) {
    (void)producer;
    const auto& consumer = workflow().consumer_of(stream);
    if (consumer.empty()) return;
    if (skip_group && workflow().group_of(consumer) == skip_group) return;
    if (db_.progress().dropped.count({consumer, round})) {
        db_.garbage_collect(stream, round);
        return;
    }
    if (!db_.stream_batch(stream, round)) {
        drop_round(consumer, round);
        return;
    }
    const auto& def = workflow().get(consumer);
    for (const auto& s : def.stream_inputs)
        if (!db_.stream_batch(s, round)) return;
    enqueue_trigger(consumer, round);
}

void Partition::drop_round(const std::string& procedure, Round round) {
    if (!db_.progress().dropped.emplace(procedure, round).second) return;
    const auto& def = workflow().get(procedure);
    for (const auto& s : def.stream_inputs) db_.garbage_collect(s, round);
    for (const auto& s : def.stream_outputs) {
        const auto& c = workflow().consumer_of(s);
        if (!c.empty()) drop_round(c, round);
    }
}

void Partition::apply_abort(std::string_view procedure, Round round) {
    const ProcedureDef* def = workflow().find(procedure);
    if (!def) {
        const auto* g = workflow().find_group(procedure);
        if (!g) fail(ErrorCode::UnknownProcedure, std::string(procedure));
        def = &workflow().get(g->execution_order.front());
    }
    for (const auto& s : def->stream_inputs) db_.garbage_collect(s, round);
    for (const auto& s : def->stream_outputs) {
        const auto& c = workflow().consumer_of(s);
        if (!c.empty()) drop_round(c, round);
    }
}

// ---------------------------------------------------------------------------
// Driving

bool Partition::step() {
    if (crashed_ || halted_) return false;
    auto w = schedule_next();
    if (!w) {
        bool due = false;
        {
            std::lock_guard lk(log_mu_);
            due = log_ && log_->timer_due(std::chrono::steady_clock::now());
        }
        if (due) {
            ++counters_.timer_flushes;
            flush_log();
        }
        return false;
    }
    dispatch(std::move(*w));
    return true;
}

void Partition::run_until_idle() {
    while (step()) {
    }
}

void Partition::wait_idle() {
    if (thread_.joinable()) {
        std::unique_lock lk(mu_);
        idle_cv_.wait(lk, [&] { return (fast_.empty() && (client_q_.empty() || paused_) && !busy_) || crashed_ || halted_ || exited_;
        });
    } else {
        run_until_idle();
    }
    if (!crashed_ && !halted_) flush_log();
}

void Partition::flush_log() {
    std::vector<std::pair<std::shared_ptr<std::promise<Outcome>>, Outcome>> acks;
    {
        std::lock_guard lk(log_mu_);
        if (log_) {
            try {
                log_->flush();
            } catch (const SimulatedCrash&) {
                crashed_ = true;
                throw;
            } catch (const Error&) {
                halted_ = true;
                throw;
            }
        }
        acks.swap(pending_acks_);
    }
    for (auto& [p, o] : acks) p->set_value(std::move(o));
}

void Partition::start() {
    if (thread_.joinable()) return;
    {
        std::lock_guard lk(mu_);
        stop_ = false;
        exited_ = false;
    }
    thread_ = std::thread([this] { executor_loop(); });
}

void Partition::stop() {
    if (!thread_.joinable()) return;
    {
        std::lock_guard lk(mu_);
        stop_ = true;
    }
    work_cv_.notify_all();
    space_cv_.notify_all();
    thread_.join();
    if (thread_error_) {
        auto e = thread_error_;
        thread_error_ = nullptr;
        std::rethrow_exception(e);
    }
}

void Partition::executor_loop() {
    try {
        for (;;) {
            std::optional<ScheduledWork> w;
            {
                std::unique_lock lk(mu_);
                auto ready = [&] { return stop_ || has_work_locked(); };
                bool pending_log = false;
                {
                    std::lock_guard lg(log_mu_);
                    pending_log = log_ && log_->pending() > 0;
                }
                if (pending_log) work_cv_.wait_for(lk, opts_.group_commit.max_delay, ready);
                else work_cv_.wait(lk, ready);
                if (has_work_locked()) {
                    w = pop_locked();
                    busy_ = true;
                } else if (stop_) {
                    break;
                }
            }
            if (w) {
                try {
                    dispatch(std::move(*w));
                } catch (const SimulatedCrash&) {
                    throw;
                } catch (const Error& e) {
                    if (halted_) throw;
                }
                std::lock_guard lk(mu_);
                busy_ = false;
                if (fast_.empty() && (client_q_.empty() || paused_)) idle_cv_.notify_all();
                continue;
            }
            bool due = false;
            {
                std::lock_guard lg(log_mu_);
                due = log_ && log_->timer_due(std::chrono::steady_clock::now());
            }
            if (due) {
                ++counters_.timer_flushes;
                flush_log();
            }
            idle_cv_.notify_all();
        }
    } catch (const SimulatedCrash&) {
        crashed_ = true;
    } catch (...) {
        thread_error_ = std::current_exception();
    }
    std::lock_guard lk(mu_);
    busy_ = false;
    exited_ = true;
    idle_cv_.notify_all();
}

void Partition::drain_and_quiesce(std::chrono::milliseconds timeout) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    if (thread_.joinable()) {
        std::unique_lock lk(mu_);
        paused_ = true;
        if (!idle_cv_.wait_until(lk, deadline, [&] { return (fast_.empty() && !busy_) || crashed_; })) {
            paused_ = false;
            work_cv_.notify_all();
            fail(ErrorCode::Timeout, "quiesce timed out");
        }
    } else {
        {
            std::lock_guard lk(mu_);
            if (timeout.count() == 0 && !fast_.empty()) fail(ErrorCode::Timeout, "pending fast-track work");
            paused_ = true;
        }
        while (step()) {
            if (std::chrono::steady_clock::now() > deadline) {
                resume();
                fail(ErrorCode::Timeout, "quiesce timed out");
            }
        }
    }
    flush_log();
}

void Partition::resume() {
    {
        std::lock_guard lk(mu_);
        paused_ = false;
    }
    work_cv_.notify_all();
}

std::vector<TERequest> Partition::refire_nonempty_streams() {
    std::vector<TERequest> out;
    const auto& progress = db_.progress();
    for (const auto& e : workflow().edges()) {
        for (auto b : db_.pending_batches(e.stream)) {
            auto last = progress.last_round.find(e.consumer);
            bool stale = (last != progress.last_round.end() && b <= last->second) ||
                         progress.dropped.count({e.consumer, b});
            if (stale) {
                db_.garbage_collect(e.stream, b);
                continue;
            }
            const auto* g = workflow().group_of(e.consumer);
            if (g && g->execution_order.front() != e.consumer) continue;
            const auto& def = workflow().get(e.consumer);
            bool ready = std::all_of(def.stream_inputs.begin(), def.stream_inputs.end(),
                                     [&](const auto& s) { return db_.stream_batch(s, b) != nullptr; });
            if (!ready) continue;
            TERequest req{e.consumer, b, {}, Origin::Trigger};
            if (std::find(out.begin(), out.end(), req) == out.end()) out.push_back(req);
        }
    }
    std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
        return std::tuple(a.round, workflow().order_index(a.procedure)) <
               std::tuple(b.round, workflow().order_index(b.procedure));
    });
    std::lock_guard lk(mu_);
    for (const auto& r : out)
        fast_.emplace(FastKey{r.round, workflow().order_index(r.procedure), r.procedure}, r);
    return out;
}

namespace {

void sync_dir(const std::filesystem::path& dir) {
    int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (fd < 0) return;
    ::fsync(fd);
    ::close(fd);
}

} // namespace

std::filesystem::path Partition::checkpoint() {
    if (opts_.dir.empty()) fail(ErrorCode::IOFailure, "checkpoint needs a directory");
    bool was_paused;
    {
        std::lock_guard lk(mu_);
        was_paused = paused_;
    }
    drain_and_quiesce();
    std::filesystem::create_directories(opts_.dir);
    const CommitSeq seq = last_commit_seq();
    auto blob = db_.snapshot_state(opts_.id, seq);
    auto path = opts_.dir / ("snap-" + std::to_string(seq) + ".stx");

    if (opts_.faults) {
        auto n = ++opts_.faults->snapshots;
        if (opts_.faults->crash_on_snapshot && *opts_.faults->crash_on_snapshot == n) {
            {
                DurableFile torn(path, opts_.sync);
                torn.truncate(0);
                torn.write(std::span(blob).first(std::min(opts_.faults->snapshot_torn_bytes, blob.size())));
                torn.sync();
            }
            crash();
            throw SimulatedCrash("snapshot " + std::to_string(n));
        }
    }
    auto tmp = path;
    tmp += ".tmp";
    std::filesystem::remove(tmp);
    {
        DurableFile out(tmp, opts_.sync);
        out.write(blob);
        out.sync();
    }
    std::filesystem::rename(tmp, path);
    if (opts_.sync) sync_dir(opts_.dir);

    if (cache_) {
        Round low = 0;
        bool first = true;
        for (const auto& p : workflow().procedures()) {
            if (p.kind != ProcedureKind::Border) continue;
            auto it = db_.progress().last_round.find(p.name);
            Round r = it == db_.progress().last_round.end() ? 0 : it->second;
            low = first ? r : std::min(low, r);
            first = false;
        }
        // A round with interior work still pending is not done.
        for (const auto& e : workflow().edges())
            for (auto b : db_.pending_batches(e.stream)) low = std::min(low, b - 1);
        cache_->trim(low);
        cache_->rewrite();
    }
    if (!was_paused) resume();
    return path;
}

void Partition::crash() {
    crashed_ = true;
    {
        std::lock_guard lk(log_mu_);
        if (log_) log_->drop();
    }
    {
        std::lock_guard lk(mu_);
        stop_ = true;
    }
    work_cv_.notify_all();
    space_cv_.notify_all();
    if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) {
        thread_.join();
        thread_error_ = nullptr;
    }
}

} // namespace streamtx
