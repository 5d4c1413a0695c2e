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
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "streamtx/metrics.hpp"
#include "streamtx/value.hpp"

namespace streamtx {

enum class RecoveryMode : std::uint8_t { None = 0, Strong = 1, Weak = 2 };

std::string_view to_string(RecoveryMode m);
std::optional<RecoveryMode> parse_recovery_mode(std::string_view s);

struct GroupCommitOptions {
    std::size_t max_batch = 1;
    std::chrono::microseconds max_delay{1000};
};

/// Scripted crash injection for durability tests. Flush and snapshot
/// ordinals are 1-based and count per partition.
struct FaultPlan {
    std::optional<std::uint64_t> crash_on_flush;
    /// Bytes of the doomed flush that still reach the file.
    std::size_t torn_bytes = 0;
    std::optional<std::uint64_t> crash_on_snapshot;
    std::size_t snapshot_torn_bytes = 0;

    std::uint64_t flushes = 0;
    std::uint64_t snapshots = 0;
};

/// One durable replay unit. A zero commit_seq marks an aborted streaming TE,
/// whose cleanup replay has to reproduce.
struct LogRecord {
    CommitSeq commit_seq = 0;
    std::string procedure;
    Round round = 0;
    std::vector<std::uint8_t> args;

    bool is_abort() const { return commit_seq == 0; }
    bool operator==(const LogRecord&) const = default;
};

struct LogHeader {
    std::uint32_t version = 0;
    RecoveryMode mode = RecoveryMode::None;
    std::uint32_t partition = 0;
};

struct LogContents {
    LogHeader header;
    std::vector<LogRecord> records;
    std::uint64_t valid_bytes = 0;
    std::uint64_t file_bytes = 0;

    bool truncated() const { return valid_bytes != file_bytes; }
};

inline constexpr std::string_view kLogMagic = "STXLOG01";
inline constexpr std::string_view kInputCacheMagic = "STXINP01";
inline constexpr std::uint32_t kLogVersion = 1;
inline constexpr std::size_t kLogHeaderBytes = 8 + 4 + 1 + 4;

/// Framed record codec shared by the command log and the input cache.
std::vector<std::uint8_t> encode_log_header(std::string_view magic, RecoveryMode mode, std::uint32_t partition);
void encode_record(std::vector<std::uint8_t>& out, const LogRecord& r);

/// Parses a whole file image. Stops at the first torn or corrupt record.
/// Throws CorruptLogRecord on a bad header and VersionMismatch on a version
/// it does not understand.
LogContents parse_framed(std::span<const std::uint8_t> image, std::string_view magic);

std::vector<std::uint8_t> read_file(const std::filesystem::path& p);
LogContents read_command_log(const std::filesystem::path& p);

/// Append-only file with explicit durability points.
class DurableFile {
public:
    DurableFile(const std::filesystem::path& p, bool sync);
    ~DurableFile();
    DurableFile(const DurableFile&) = delete;
    DurableFile& operator=(const DurableFile&) = delete;

    void write(std::span<const std::uint8_t> bytes);
    void sync();
    void truncate(std::uint64_t size);
    std::uint64_t size() const { return size_; }

private:
    int fd_ = -1;
    bool sync_ = true;
    std::uint64_t size_ = 0;
    std::filesystem::path path_;
};

/// Command log with group commit. Records are buffered and become durable
/// together on flush(): when the batch is full, when the delay elapses, or on
/// request.
class CommandLog {
public:
    CommandLog(const std::filesystem::path& path, RecoveryMode mode, std::uint32_t partition, GroupCommitOptions gc,
               std::shared_ptr<FaultPlan> faults, bool sync, Counters& counters);

    void append(const LogRecord& r);
    std::size_t pending() const { return pending_records_; }
    bool batch_full() const { return pending_records_ >= gc_.max_batch; }
    bool timer_due(std::chrono::steady_clock::time_point now) const;
    /// Makes every buffered record durable. Throws SimulatedCrash when the
    /// fault plan says so, after writing the torn prefix.
    void flush();
    /// Discards buffered records (simulated power loss).
    void drop();

    const std::filesystem::path& path() const { return path_; }
    RecoveryMode mode() const { return mode_; }
    /// Bytes cut from a corrupt tail when the file was opened.
    std::uint64_t truncated_bytes() const { return truncated_; }

private:
    std::filesystem::path path_;
    RecoveryMode mode_;
    GroupCommitOptions gc_;
    std::shared_ptr<FaultPlan> faults_;
    Counters& counters_;
    std::unique_ptr<DurableFile> file_;
    std::vector<std::uint8_t> buffer_;
    std::size_t pending_records_ = 0;
    std::chrono::steady_clock::time_point oldest_{};
    std::uint64_t truncated_ = 0;
};

} // namespace streamtx
