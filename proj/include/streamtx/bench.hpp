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
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "streamtx/leaderboard.hpp"
#include "streamtx/metrics.hpp"
#include "streamtx/recovery.hpp"
#include "streamtx/workload.hpp"

namespace streamtx {

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct MetricsReport {
    std::string bench;
    std::string mode;
    std::vector<std::pair<std::string, std::string>> params;
    /// Measured workflows (rounds) and TEs, warm-up excluded.
    std::uint64_t workflows = 0;
    std::uint64_t tes = 0;
    double seconds = 0;
    double workflows_per_sec = 0;
    double tes_per_sec = 0;
    double latency_p50_us = 0;
    double latency_p95_us = 0;
    double latency_p99_us = 0;
    /// Counter deltas over the measured phase.
    CounterValues counters;
    std::map<std::string, double> stats;
    std::vector<Check> checks;

    void param(std::string key, std::string value) { params.emplace_back(std::move(key), std::move(value)); }
    void check(std::string name, bool ok, std::string detail = {});
    bool passed() const;
    std::string to_json() const;
    /// "key,value" lines.
    std::string to_csv() const;
};

std::string reports_to_json(const std::vector<MetricsReport>& rs);
std::string reports_to_csv(const std::vector<MetricsReport>& rs);

struct BenchOptions {
    std::uint64_t rounds = 1000;
    std::size_t batch_size = 10;
    double warmup_fraction = 0.1;
    std::uint64_t seed = 1;
    /// Run the partition on its own executor thread (clients pay real
    /// round-trips); otherwise the caller's thread steps it.
    bool threaded = true;
};

MetricsReport run_ee_trigger_bench(std::size_t k, EngineMode mode, const BenchOptions& o);
MetricsReport run_pe_trigger_bench(std::size_t n, EngineMode mode, const BenchOptions& o);
/// Triggered = native window; client_driven = table-emulated window.
MetricsReport run_window_bench(std::size_t size, std::size_t slide, EngineMode mode, const BenchOptions& o);

/// Per-event (count, sum) pairs in commit order, as written by the window
/// workload.
std::vector<std::pair<std::int64_t, std::int64_t>> window_bench_events(const Database& db);

struct LeaderboardRun {
    MetricsReport report;
    LeaderboardState state;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    Schedule schedule;
};

LeaderboardRun run_leaderboard(const LeaderboardParams& params, const std::vector<Vote>& votes);

struct CrashPoint {
    enum class Kind : std::uint8_t { None, AfterRound, MidFlush, MidSnapshot };
    Kind kind = Kind::None;
    std::uint64_t at = 0;
    std::size_t torn_bytes = 0;

    /// "none", "after-round:R", "mid-flush:N[:torn]", "mid-snapshot:N[:torn]".
    static CrashPoint parse(std::string_view s);
    std::string to_string() const;
};

struct RecoveryExperiment {
    std::size_t n = 4;
    RecoveryMode mode = RecoveryMode::Strong;
    CrashPoint crash;
    std::uint64_t rounds = 20;
    std::size_t batch_size = 4;
    std::size_t group_commit_batch = 1;
    std::uint64_t checkpoint_every = 0;
    std::filesystem::path dir = "streamtx-recovery";
    bool sync = true;
    std::uint64_t seed = 1;
};

struct RecoveryOutcome {
    MetricsReport report;
    bool crashed = false;
    /// Strong: recovered state bit-equal to the crash-free run after the same
    /// commit. Weak: not applicable (true).
    bool prefix_equal = false;
    /// After finishing the feed: strong compares bit-exact, weak compares the
    /// public tables as multisets.
    bool final_equal = false;
    bool schedule_valid = false;
    bool durable_acks = false;
    RecoveryReport recovery;
    /// Log records written by a crash-free logged run of the same feed.
    std::uint64_t clean_log_records = 0;
};

RecoveryOutcome run_recovery_experiment(const RecoveryExperiment& e);

struct ScalingOptions {
    std::size_t stages = 2;
    std::uint64_t tuples = 4000;
    std::size_t batch_size = 1;
    std::int64_t keys = 1024;
    RecoveryMode mode = RecoveryMode::Strong;
    std::filesystem::path dir = "streamtx-scaling";
    bool sync = true;
    std::uint64_t seed = 1;
    double warmup_fraction = 0.1;
};

struct ScalingRun {
    MetricsReport report;
    /// Values of every sink tuple, sorted.
    std::vector<std::vector<Value>> outputs;
};

ScalingRun run_partition_scaling(std::uint32_t partitions, const ScalingOptions& o);

/// Runs a config-declared workload: feeds every [feed] through its
/// partitions, checkpoints every engine.checkpoint_every rounds, validates
/// each partition's schedule.
MetricsReport run_workload(const WorkloadConfig& wc, Schedule* schedule_out = nullptr);

/// Multiset view of a public table's rows.
std::vector<std::vector<Value>> sorted_rows(const Database& db, std::string_view table);

double percentile(std::vector<double> xs, double q);

} // namespace streamtx
