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

#include <filesystem>
#include <optional>

#include "streamtx/partition.hpp"

namespace streamtx {

struct RecoveryPaths {
    std::optional<std::filesystem::path> snapshot;
    std::filesystem::path log;
    std::optional<std::filesystem::path> input_cache;
};

struct RecoveryReport {
    RecoveryMode mode = RecoveryMode::None;
    std::optional<std::filesystem::path> snapshot;
    CommitSeq snapshot_seq = 0;
    std::size_t log_records = 0;
    std::size_t abort_markers = 0;
    std::size_t replayed = 0;
    std::uint64_t truncated_bytes = 0;
    std::size_t refired = 0;
    std::size_t reinjected = 0;
    std::uint64_t client_path_replays = 0;
    std::uint64_t trigger_dispatches = 0;
    /// Last commit sequence assigned by replay itself (before refire).
    CommitSeq replayed_to = 0;
    double millis = 0;
};

/// Newest snap-<seq>.stx in `dir` whose checksum verifies.
std::optional<std::filesystem::path> latest_valid_snapshot(const std::filesystem::path& dir);

/// The files a partition with this directory would write.
RecoveryPaths recovery_paths(const std::filesystem::path& dir);

/// Restores `p` (a freshly built partition) and replays the log in the mode
/// recorded in its header. The executor must not be running. Strong mode
/// leaves refired work queued; weak mode runs everything to idle.
RecoveryReport recover(Partition& p, const RecoveryPaths& paths);
RecoveryReport recover_strong(Partition& p, const RecoveryPaths& paths);
RecoveryReport recover_weak(Partition& p, const RecoveryPaths& paths);

struct DispatchPrediction {
    std::uint64_t client_path = 0;
    std::uint64_t trigger = 0;
};

/// Replay dispatches a full recovery of `rounds` OLTP-free rounds costs.
DispatchPrediction recovery_dispatch_count(RecoveryMode mode, const Workflow& w, Round rounds);

} // namespace streamtx
