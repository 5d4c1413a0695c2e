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

#include "streamtx/command_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "streamtx/codec.hpp"
#include "streamtx/error.hpp"

namespace streamtx {

std::string_view to_string(RecoveryMode m) {
    switch (m) {
    case RecoveryMode::None: return "none";
    case RecoveryMode::Strong: return "strong";
    case RecoveryMode::Weak: return "weak";
    }
    return "?";
}

std::optional<RecoveryMode> parse_recovery_mode(std::string_view s) {
    if (s == "none") return RecoveryMode::None;
    if (s == "strong") return RecoveryMode::Strong;
    if (s == "weak") return RecoveryMode::Weak;
    return std::nullopt;
}

std::vector<std::uint8_t> encode_log_header(std::string_view magic, RecoveryMode mode, std::uint32_t partition) {
    ByteWriter w;
    w.raw(magic);
    w.u32(kLogVersion);
    w.u8(static_cast<std::uint8_t>(mode));
    w.u32(partition);
    return std::move(w.buffer());
}

void encode_record(std::vector<std::uint8_t>& out, const LogRecord& r) {
    ByteWriter payload;
    payload.u64(r.commit_seq);
    payload.str(r.procedure);
    payload.u64(r.round);
    payload.bytes(r.args);
    ByteWriter frame;
    frame.u32(static_cast<std::uint32_t>(payload.size()));
    out.insert(out.end(), frame.buffer().begin(), frame.buffer().end());
    out.insert(out.end(), payload.buffer().begin(), payload.buffer().end());
    frame.buffer().clear();
    frame.u32(crc32(payload.buffer()));
    out.insert(out.end(), frame.buffer().begin(), frame.buffer().end());
}

LogContents parse_framed(std::span<const std::uint8_t> image, std::string_view magic) {
    LogContents c;
    c.file_bytes = image.size();
    if (image.size() < kLogHeaderBytes) fail(ErrorCode::CorruptLogRecord, "log header truncated");
    ByteReader h(image.first(kLogHeaderBytes));
    if (h.raw(8) != magic) fail(ErrorCode::CorruptLogRecord, "bad log magic");
    c.header.version = h.u32();
    if (c.header.version != kLogVersion)
        fail(ErrorCode::VersionMismatch, "log version " + std::to_string(c.header.version));
    auto mode = h.u8();
    if (mode > 2) fail(ErrorCode::CorruptLogRecord, "bad recovery mode in header");
    c.header.mode = static_cast<RecoveryMode>(mode);
    c.header.partition = h.u32();

    std::size_t pos = kLogHeaderBytes;
    c.valid_bytes = pos;
    CommitSeq last = 0;
    while (pos + 4 <= image.size()) {
        ByteReader lr(image.subspan(pos, 4));
        auto len = lr.u32();
        if (pos + 4 + std::size_t{len} + 4 > image.size()) break;
        auto payload = image.subspan(pos + 4, len);
        ByteReader cr(image.subspan(pos + 4 + len, 4));
        if (crc32(payload) != cr.u32()) break;
        LogRecord rec;
        try {
            ByteReader r(payload);
            rec.commit_seq = r.u64();
            rec.procedure = r.str();
            rec.round = r.u64();
            rec.args = r.bytes();
            if (!r.done()) break;
        } catch (const Error&) {
            break;
        }
        if (rec.commit_seq != 0) {
            if (rec.commit_seq <= last) break;
            last = rec.commit_seq;
        }
        c.records.push_back(std::move(rec));
        pos += 4 + len + 4;
        c.valid_bytes = pos;
    }
    return c;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(ErrorCode::IOFailure, "cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

LogContents read_command_log(const std::filesystem::path& p) { return parse_framed(read_file(p), kLogMagic); }

// ---------------------------------------------------------------------------
// DurableFile

DurableFile::DurableFile(const std::filesystem::path& p, bool sync) : sync_(sync), path_(p) {
    fd_ = ::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) fail(ErrorCode::IOFailure, "open " + p.string() + ": " + std::strerror(errno));
    auto end = ::lseek(fd_, 0, SEEK_END);
    size_ = end < 0 ? 0 : static_cast<std::uint64_t>(end);
}

DurableFile::~DurableFile() {
    if (fd_ >= 0) ::close(fd_);
}

void DurableFile::write(std::span<const std::uint8_t> bytes) {
    const auto* p = bytes.data();
    std::size_t left = bytes.size();
    while (left > 0) {
        auto n = ::write(fd_, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail(ErrorCode::LogWriteFailure, "write " + path_.string() + ": " + std::strerror(errno));
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
    size_ += bytes.size();
}

void DurableFile::sync() {
    if (sync_ && ::fdatasync(fd_) != 0)
        fail(ErrorCode::LogWriteFailure, "fdatasync " + path_.string() + ": " + std::strerror(errno));
}

void DurableFile::truncate(std::uint64_t size) {
    if (::ftruncate(fd_, static_cast<off_t>(size)) != 0)
        fail(ErrorCode::IOFailure, "truncate " + path_.string() + ": " + std::strerror(errno));
    size_ = size;
    sync();
}

// ---------------------------------------------------------------------------
// CommandLog

CommandLog::CommandLog(const std::filesystem::path& path, RecoveryMode mode, std::uint32_t partition,
                       GroupCommitOptions gc, std::shared_ptr<FaultPlan> faults, bool sync, Counters& counters)
    : path_(path), mode_(mode), gc_(gc), faults_(std::move(faults)), counters_(counters) {
    if (gc_.max_batch == 0) gc_.max_batch = 1;
    bool exists = std::filesystem::exists(path) && std::filesystem::file_size(path) > 0;
    if (exists) {
        auto contents = read_command_log(path);
        if (contents.header.mode != mode)
            fail(ErrorCode::VersionMismatch, "log " + path.string() + " was written in " +
                                                 std::string(to_string(contents.header.mode)) + " mode");
        file_ = std::make_unique<DurableFile>(path, sync);
        if (contents.truncated()) {
            truncated_ = contents.file_bytes - contents.valid_bytes;
            file_->truncate(contents.valid_bytes);
        }
    } else {
        file_ = std::make_unique<DurableFile>(path, sync);
        file_->write(encode_log_header(kLogMagic, mode, partition));
        file_->sync();
    }
}

void CommandLog::append(const LogRecord& r) {
    if (pending_records_ == 0) oldest_ = std::chrono::steady_clock::now();
    encode_record(buffer_, r);
    ++pending_records_;
    if (r.is_abort()) ++counters_.log_abort_records;
    else ++counters_.log_records;
}

bool CommandLog::timer_due(std::chrono::steady_clock::time_point now) const {
    return pending_records_ > 0 && now - oldest_ >= gc_.max_delay;
}

void CommandLog::flush() {
    if (pending_records_ == 0) return;
    if (faults_) {
        auto n = ++faults_->flushes;
        if (faults_->crash_on_flush && *faults_->crash_on_flush == n) {
            auto torn = std::min(faults_->torn_bytes, buffer_.size());
            if (torn > 0) {
                file_->write(std::span(buffer_).first(torn));
                file_->sync();
            }
            drop();
            throw SimulatedCrash("log flush " + std::to_string(n));
        }
    }
    file_->write(buffer_);
    file_->sync();
    ++counters_.sync_count;
    buffer_.clear();
    pending_records_ = 0;
}

void CommandLog::drop() {
    buffer_.clear();
    pending_records_ = 0;
}

} // namespace streamtx
