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

#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <thread>
#include <tuple>
#include <vector>

#include "streamtx/catalog.hpp"
#include "streamtx/command_log.hpp"
#include "streamtx/context.hpp"
#include "streamtx/error.hpp"
#include "streamtx/input_cache.hpp"
#include "streamtx/metrics.hpp"

namespace streamtx {

enum class Origin : std::uint8_t { Client, Trigger, Recovery };

std::string_view to_string(Origin o);

struct TERequest {
    std::string procedure;
    Round round = 0;
    std::vector<std::uint8_t> args;
    Origin origin = Origin::Client;

    bool operator==(const TERequest&) const = default;
};

struct Outcome {
    bool committed = false;
    std::optional<ErrorCode> error;
    std::string reason;
    CommitSeq commit_seq = 0;
    std::vector<std::vector<Value>> result;
};

using Ticket = std::shared_future<Outcome>;

struct PartitionOptions {
    std::uint32_t id = 0;
    RecoveryMode mode = RecoveryMode::None;
    /// Holds command.log, input.cache and snap-<seq>.stx files.
    std::filesystem::path dir;
    GroupCommitOptions group_commit;
    /// fdatasync on every flush; tests of pure logic may turn it off.
    bool sync = true;
    /// Client queue bound; submit blocks while the executor thread runs and
    /// the queue is full. 0 = unbounded.
    std::size_t queue_bound = 0;
    /// Keep only the newest N schedule entries. 0 = keep all.
    std::size_t schedule_retention = 0;
    bool trace_windows = false;
    std::shared_ptr<FaultPlan> faults;
};

/// A request taken off one of the queues, with its client ticket if any.
struct ScheduledWork {
    TERequest request;
    std::shared_ptr<std::promise<Outcome>> ticket;
};

/// One serial executor over one database. Client requests wait in a FIFO
/// queue; trigger-invoked requests go to the fast-track queue, which is always
/// served first and ordered by (round, position in the chosen order).
class Partition {
public:
    using CommitObserver = std::function<void(const TransactionExecution&, const Database&)>;

    explicit Partition(std::shared_ptr<const Catalog> catalog, PartitionOptions opts = {});
    ~Partition();
    Partition(const Partition&) = delete;
    Partition& operator=(const Partition&) = delete;

    /// Throws UnknownProcedure or EngineStopped.
    Ticket submit_client(TERequest req);

    std::optional<ScheduledWork> schedule_next();
    /// Executes the work and resolves its ticket (after the log flush that
    /// makes it durable, if it was logged).
    void dispatch(ScheduledWork work);
    Outcome execute_te(const TERequest& req);
    Outcome execute_nested(const NestedGroup& g, const TERequest& head);

    /// Runs one request on the calling thread. False when both queues are empty.
    bool step();
    void run_until_idle();
    /// Blocks until both queues are empty and nothing runs, then flushes the
    /// log. Runs the work itself when no executor thread is started.
    void wait_idle();

    /// Background executor thread.
    void start();
    void stop();
    bool running() const { return thread_.joinable(); }

    /// Stops taking client requests, finishes fast-track work and flushes the
    /// log. The partition stays paused until resume(). Throws Timeout.
    void drain_and_quiesce(std::chrono::milliseconds timeout = std::chrono::seconds(60));
    void resume();

    void set_pe_triggers_enabled(bool on) { pe_triggers_ = on; }
    bool pe_triggers_enabled() const { return pe_triggers_; }
    /// Enqueues consumers of every pending internal stream batch, in batch order.
    std::vector<TERequest> refire_nonempty_streams();

    /// Quiesces, writes snap-<seq>.stx, trims and rewrites the input cache.
    std::filesystem::path checkpoint();
    void flush_log();
    /// Simulated power loss: unflushed log records are lost and the partition
    /// refuses further work.
    void crash();
    bool crashed() const { return crashed_; }

    /// Reproduces the cleanup of an aborted streaming TE (log replay).
    void apply_abort(std::string_view procedure, Round round);
    /// While set, committed TEs are not appended to the command log.
    void set_replaying(bool on) { replaying_ = on; }

    void set_commit_observer(CommitObserver obs) { observer_ = std::move(obs); }

    const Catalog& catalog() const { return *catalog_; }
    const Workflow& workflow() const { return catalog_->workflow(); }
    const PartitionOptions& options() const { return opts_; }
    std::uint32_t id() const { return opts_.id; }
    RecoveryMode mode() const { return opts_.mode; }

    const Database& db() const { return db_; }
    Database& mutable_db() { return db_; }
    const Schedule& committed_schedule() const { return schedule_; }
    CounterValues counters() const { return counters_.load(); }
    Counters& raw_counters() { return counters_; }

    CommitSeq next_commit_seq() const { return next_seq_; }
    CommitSeq last_commit_seq() const { return next_seq_ - 1; }
    void set_next_commit_seq(CommitSeq s) { next_seq_ = s; }

    std::vector<TERequest> fast_track_contents() const;
    std::size_t client_queue_depth() const;

    CommandLog* command_log() { return log_.get(); }
    InputCache* input_cache() { return cache_.get(); }
    std::filesystem::path log_path() const { return opts_.dir / "command.log"; }
    std::filesystem::path input_cache_path() const { return opts_.dir / "input.cache"; }

private:
    struct FastKey {
        Round round;
        std::size_t order;
        std::string procedure;
        auto operator<=>(const FastKey&) const = default;
    };

    std::optional<ScheduledWork> pop_locked();
    bool has_work_locked() const;
    void executor_loop();

    /// Runs a body inside `undo`; throws Error on abort.
    std::vector<std::vector<Value>> run_one(const ProcedureDef& def, Round round, const ProcArgs& args,
                                            UndoBuffer& undo);
    /// Non-empty when the request cannot run at all (no bookkeeping happens).
    std::optional<Outcome> check_runnable(const ProcedureDef& def, Round round, const ProcArgs& args,
                                          bool head) const;
    void record_commit(const ProcedureDef& def, Round round, std::vector<std::uint8_t> args, CommitSeq seq);
    void handle_output(const ProcedureDef& producer, const std::string& stream, Round round,
                       const NestedGroup* skip_group);
    void drop_round(const std::string& procedure, Round round);
    void enqueue_trigger(const std::string& procedure, Round round);
    void log_record(LogRecord r);
    bool logs(const ProcedureDef& def) const;
    Outcome abort_outcome(const Error& e) const;
    void note_running(int delta);

    std::shared_ptr<const Catalog> catalog_;
    PartitionOptions opts_;
    Counters counters_;
    Database db_;
    StatementEngine stmts_;
    Schedule schedule_;
    CommitSeq next_seq_ = 1;
    bool pe_triggers_ = true;
    bool replaying_ = false;
    bool crashed_ = false;
    bool halted_ = false;
    bool logged_last_ = false;

    std::unique_ptr<CommandLog> log_;
    std::unique_ptr<InputCache> cache_;
    std::mutex log_mu_;
    std::vector<std::pair<std::shared_ptr<std::promise<Outcome>>, Outcome>> pending_acks_;

    mutable std::mutex mu_;
    std::condition_variable work_cv_;
    std::condition_variable space_cv_;
    std::condition_variable idle_cv_;
    std::deque<ScheduledWork> client_q_;
    std::map<FastKey, TERequest> fast_;
    bool paused_ = false;
    bool busy_ = false;
    bool stop_ = false;
    bool exited_ = false;
    std::thread thread_;
    std::exception_ptr thread_error_;

    CommitObserver observer_;
};

} // namespace streamtx
