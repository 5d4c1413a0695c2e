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

#include "streamtx/input_cache.hpp"

#include "streamtx/codec.hpp"
#include "streamtx/error.hpp"

namespace streamtx {

namespace {

std::map<std::string, std::map<Round, AtomicBatch>> decode_cache(std::span<const std::uint8_t> image,
                                                                 std::uint64_t* ordinal) {
    std::map<std::string, std::map<Round, AtomicBatch>> out;
    auto c = parse_framed(image, kInputCacheMagic);
    for (const auto& r : c.records) {
        ByteReader br(r.args);
        auto b = br.batch();
        out[r.procedure][r.round] = std::move(b);
        if (ordinal) *ordinal = std::max(*ordinal, r.commit_seq + 1);
    }
    return out;
}

} // namespace

InputCache::InputCache(const std::filesystem::path& path, std::uint32_t partition, bool sync, Counters& counters)
    : path_(path), partition_(partition), sync_(sync), counters_(counters) {
    if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
        auto image = read_file(path);
        auto c = parse_framed(image, kInputCacheMagic);
        retained_ = decode_cache(image, &next_ordinal_);
        file_ = std::make_unique<DurableFile>(path, sync);
        if (c.truncated()) file_->truncate(c.valid_bytes);
    } else {
        file_ = std::make_unique<DurableFile>(path, sync);
        file_->write(encode_log_header(kInputCacheMagic, RecoveryMode::Weak, partition));
        file_->sync();
    }
}

void InputCache::append(const std::string& stream, const AtomicBatch& batch) {
    ByteWriter w;
    w.batch(batch);
    std::vector<std::uint8_t> rec;
    encode_record(rec, LogRecord{next_ordinal_++, stream, batch.batch_id, std::move(w.buffer())});
    file_->write(rec);
    file_->sync();
    retained_[stream][batch.batch_id] = batch;
    ++counters_.input_cache_appends;
}

std::size_t InputCache::trim(Round low_water) {
    if (low_water <= low_water_) return 0;
    low_water_ = low_water;
    std::size_t removed = 0;
    for (auto& [stream, batches] : retained_) {
        auto end = batches.upper_bound(low_water);
        removed += static_cast<std::size_t>(std::distance(batches.begin(), end));
        batches.erase(batches.begin(), end);
    }
    return removed;
}

void InputCache::rewrite() {
    auto tmp = path_;
    tmp += ".tmp";
    std::filesystem::remove(tmp);
    {
        DurableFile out(tmp, sync_);
        auto image = encode_log_header(kInputCacheMagic, RecoveryMode::Weak, partition_);
        std::uint64_t ordinal = 1;
        for (const auto& [stream, batches] : retained_)
            for (const auto& [round, b] : batches) {
                ByteWriter w;
                w.batch(b);
                encode_record(image, LogRecord{ordinal++, stream, round, std::move(w.buffer())});
            }
        next_ordinal_ = ordinal;
        out.write(image);
        out.sync();
    }
    file_.reset();
    std::filesystem::rename(tmp, path_);
    file_ = std::make_unique<DurableFile>(path_, sync_);
}

std::size_t InputCache::size() const {
    std::size_t n = 0;
    for (const auto& [s, b] : retained_) n += b.size();
    return n;
}

std::map<std::string, std::map<Round, AtomicBatch>> InputCache::load(const std::filesystem::path& path) {
    return decode_cache(read_file(path), nullptr);
}

} // namespace streamtx
