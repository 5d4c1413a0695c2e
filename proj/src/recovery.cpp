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

#include "streamtx/recovery.hpp"

#include <algorithm>
#include <chrono>
#include <regex>

namespace streamtx {

std::optional<std::filesystem::path> latest_valid_snapshot(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) return std::nullopt;
    static const std::regex name(R"(snap-(\d+)\.stx)");
    std::vector<std::pair<CommitSeq, std::filesystem::path>> found;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        std::smatch m;
        auto fn = e.path().filename().string();
        if (std::regex_match(fn, m, name)) found.emplace_back(std::stoull(m[1].str()), e.path());
    }
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [seq, path] : found) {
        try {
            Database probe;
            probe.restore_state(read_file(path));
            return path;
        } catch (const Error&) {
        }
    }
    return std::nullopt;
}

RecoveryPaths recovery_paths(const std::filesystem::path& dir) {
    RecoveryPaths p;
    p.snapshot = latest_valid_snapshot(dir);
    p.log = dir / "command.log";
    if (std::filesystem::exists(dir / "input.cache")) p.input_cache = dir / "input.cache";
    return p;
}

namespace {

struct Prepared {
    LogContents log;
    CommitSeq snapshot_seq = 0;
};

Prepared prepare(Partition& p, const RecoveryPaths& paths, RecoveryMode expected, RecoveryReport& rep) {
    if (p.running()) fail(ErrorCode::InvalidWorkflow, "recovery needs a stopped executor");
    Prepared out;
    out.log = read_command_log(paths.log);
    if (out.log.header.mode != expected)
        fail(ErrorCode::VersionMismatch, "log was written in " + std::string(to_string(out.log.header.mode)) +
                                             " mode, not " + std::string(to_string(expected)));
    rep.mode = expected;
    rep.truncated_bytes = out.log.file_bytes - out.log.valid_bytes;
    rep.log_records = out.log.records.size();
    if (paths.snapshot) {
        auto h = p.mutable_db().restore_state(read_file(*paths.snapshot));
        p.mutable_db().set_access_tracing(p.options().trace_windows);
        out.snapshot_seq = h.commit_seq;
        rep.snapshot = paths.snapshot;
        rep.snapshot_seq = h.commit_seq;
        p.set_next_commit_seq(h.commit_seq + 1);
    }
    return out;
}

Outcome replay(Partition& p, const LogRecord& rec) {
    auto out = p.execute_te(TERequest{rec.procedure, rec.round, rec.args, Origin::Recovery});
    if (!out.committed)
        fail(ErrorCode::ReplayDivergence, rec.procedure + " round " + std::to_string(rec.round) + " (seq " +
                                              std::to_string(rec.commit_seq) + ") did not commit on replay: " +
                                              out.reason);
    return out;
}

} // namespace

RecoveryReport recover_strong(Partition& p, const RecoveryPaths& paths) {
    auto t0 = std::chrono::steady_clock::now();
    RecoveryReport rep;
    auto before = p.counters();
    p.set_pe_triggers_enabled(false);
    auto prep = prepare(p, paths, RecoveryMode::Strong, rep);

    p.set_replaying(true);
    CommitSeq previous = 0;
    for (const auto& rec : prep.log.records) {
        if (rec.is_abort()) {
            // Aborts are idempotent cleanups; one sitting right after the
            // snapshot's last commit may already be reflected in it.
            if (previous >= prep.snapshot_seq) {
                p.apply_abort(rec.procedure, rec.round);
                ++rep.abort_markers;
            }
            continue;
        }
        previous = rec.commit_seq;
        if (rec.commit_seq <= prep.snapshot_seq) continue;
        if (rec.commit_seq != p.next_commit_seq())
            fail(ErrorCode::ReplayDivergence, "log seq " + std::to_string(rec.commit_seq) + " but engine expects " +
                                                  std::to_string(p.next_commit_seq()));
        replay(p, rec);
        ++rep.replayed;
    }
    p.set_replaying(false);
    rep.replayed_to = p.last_commit_seq();

    p.set_pe_triggers_enabled(true);
    rep.refired = p.refire_nonempty_streams().size();
    auto delta = p.counters() - before;
    rep.client_path_replays = delta.recovery_replays;
    rep.trigger_dispatches = delta.trigger_dispatches;
    rep.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

RecoveryReport recover_weak(Partition& p, const RecoveryPaths& paths) {
    auto t0 = std::chrono::steady_clock::now();
    RecoveryReport rep;
    auto before = p.counters();
    p.set_pe_triggers_enabled(true);
    auto prep = prepare(p, paths, RecoveryMode::Weak, rep);

    rep.refired = p.refire_nonempty_streams().size();
    p.run_until_idle();

    p.set_replaying(true);
    CommitSeq last_logged = 0;
    for (const auto& rec : prep.log.records) {
        if (rec.is_abort()) continue;
        last_logged = rec.commit_seq;
        if (rec.commit_seq <= prep.snapshot_seq) continue;
        replay(p, rec);
        ++rep.replayed;
        p.run_until_idle();
    }
    p.set_replaying(false);
    rep.replayed_to = p.last_commit_seq();
    // New commits must sort after everything already in the log.
    if (p.next_commit_seq() <= last_logged) p.set_next_commit_seq(last_logged + 1);

    if (paths.input_cache) {
        auto cached = InputCache::load(*paths.input_cache);
        std::vector<std::tuple<Round, std::string, const AtomicBatch*>> pending;
        for (const auto& [stream, batches] : cached) {
            const auto& border = p.workflow().consumer_of(stream);
            if (border.empty()) continue;
            const auto& progress = p.db().progress();
            auto it = progress.last_round.find(border);
            Round done = it == progress.last_round.end() ? 0 : it->second;
            for (const auto& [round, b] : batches)
                if (round > done) pending.emplace_back(round, border, &b);
        }
        std::sort(pending.begin(), pending.end(), [](const auto& a, const auto& b) {
            return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
        });
        for (const auto& [round, border, batch] : pending) {
            const auto& stream = p.workflow().get(border).stream_inputs.front();
            if (auto* cache = p.input_cache()) {
                auto it = cache->retained().find(stream);
                if (it == cache->retained().end() || !it->second.count(round)) cache->append(stream, *batch);
            }
            p.execute_te(TERequest{border, round, encode_args(ProcArgs{{}, *batch}), Origin::Recovery});
            ++rep.reinjected;
            p.run_until_idle();
        }
        p.flush_log();
    }
    auto delta = p.counters() - before;
    rep.client_path_replays = delta.recovery_replays;
    rep.trigger_dispatches = delta.trigger_dispatches;
    rep.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

RecoveryReport recover(Partition& p, const RecoveryPaths& paths) {
    auto log = read_command_log(paths.log);
    switch (log.header.mode) {
    case RecoveryMode::Strong: return recover_strong(p, paths);
    case RecoveryMode::Weak: return recover_weak(p, paths);
    default: fail(ErrorCode::VersionMismatch, "log has no recovery mode");
    }
}

DispatchPrediction recovery_dispatch_count(RecoveryMode mode, const Workflow& w, Round rounds) {
    DispatchPrediction d;
    const auto n = static_cast<std::uint64_t>(w.streaming_count());
    const auto borders = static_cast<std::uint64_t>(w.border_count());
    if (mode == RecoveryMode::Strong) {
        d.client_path = rounds * n;
    } else if (mode == RecoveryMode::Weak) {
        d.client_path = rounds * borders;
        d.trigger = rounds * (n - borders);
    }
    return d;
}

} // namespace streamtx
