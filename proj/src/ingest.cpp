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

#include "streamtx/ingest.hpp"

#include <chrono>
#include <fstream>
#include <thread>

namespace streamtx {

AtomicBatch Batcher::cut() {
    AtomicBatch b;
    b.batch_id = next_++;
    b.tuples = std::move(buf_);
    buf_.clear();
    for (auto& t : b.tuples) t.meta.batch_id = b.batch_id;
    return b;
}

std::vector<AtomicBatch> Batcher::push(Tuple t) {
    std::vector<AtomicBatch> out;
    if (policy_.mode == BatchingPolicy::Mode::SameTimestamp) {
        if (!buf_.empty() && buf_.back().meta.ts != t.meta.ts) out.push_back(cut());
        buf_.push_back(std::move(t));
    } else {
        buf_.push_back(std::move(t));
        if (buf_.size() >= std::max<std::size_t>(1, policy_.count)) out.push_back(cut());
    }
    return out;
}

std::optional<AtomicBatch> Batcher::finish() {
    if (buf_.empty()) return std::nullopt;
    return cut();
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

std::vector<Tuple> read_csv_feed(const std::filesystem::path& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IOFailure, "cannot open feed " + path.string());
    std::string line;
    // Blank lines and lines starting with '#' are skipped.
    std::size_t lineno = 0;
    auto next = [&] {
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty() && line[0] != '#') return true;
        }
        return false;
    };
    if (!next()) return {};
    auto header = split_csv_line(line);
    std::vector<int> slot(header.size(), -2);
    std::size_t found = 0;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (auto idx = schema.index_of(header[i])) {
            slot[i] = static_cast<int>(*idx);
            ++found;
        } else if (header[i] == "ts") {
            slot[i] = -1;
        } else {
            fail(ErrorCode::SchemaMismatch, "feed column " + header[i] + " not in schema");
        }
    }
    if (found != schema.arity()) fail(ErrorCode::SchemaMismatch, "feed header misses schema columns");

    std::vector<Tuple> out;
    while (next()) {
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            fail(ErrorCode::SchemaMismatch, path.string() + ":" + std::to_string(lineno) + ": wrong cell count");
        Tuple t;
        t.values.resize(schema.arity());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            try {
                if (slot[i] == -1) t.meta.ts = std::stoll(cells[i]);
                else t.values[slot[i]] = parse_value(cells[i], schema.columns()[slot[i]].type);
            } catch (const std::exception& e) {
                fail(ErrorCode::SchemaMismatch, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
        out.push_back(std::move(t));
    }
    return out;
}

Ingestor::Ingestor(Partition& p, std::string stream, BatchingPolicy policy, BatchId first)
    : p_(p), stream_(std::move(stream)), schema_(p.catalog().stream_schema(stream_)), batcher_(policy, first) {
    if (!p.catalog().is_external(stream_)) fail(ErrorCode::WrongKind, stream_ + " is not an external stream");
    border_ = p.workflow().consumer_of(stream_);
    if (border_.empty()) fail(ErrorCode::WrongKind, stream_ + " has no border procedure");
}

Ticket Ingestor::submit_batch(const AtomicBatch& b) {
    if (p_.crashed()) fail(ErrorCode::EngineStopped, "partition is down");
    if (auto* cache = p_.input_cache()) cache->append(stream_, b);
    return p_.submit_client(TERequest{border_, b.batch_id, encode_args(ProcArgs{{}, b}), Origin::Client});
}

std::vector<Ticket> Ingestor::push(std::vector<Value> values, std::int64_t ts) {
    if (closed_) fail(ErrorCode::EngineStopped, stream_ + " is closed");
    try {
        schema_.check(values);
    } catch (const Error& e) {
        fail(ErrorCode::SchemaMismatch, e.what());
    }
    std::vector<Ticket> out;
    for (auto& b : batcher_.push(Tuple{std::move(values), {0, 0, ts}})) out.push_back(submit_batch(b));
    return out;
}

std::vector<Ticket> Ingestor::push_all(const std::vector<Tuple>& feed, double rate) {
    std::vector<Ticket> out;
    auto start = std::chrono::steady_clock::now();
    std::size_t n = 0;
    for (const auto& t : feed) {
        if (rate > 0) {
            auto due = start + std::chrono::duration<double>(static_cast<double>(n) / rate);
            std::this_thread::sleep_until(due);
        }
        for (auto& tk : push(t.values, t.meta.ts)) out.push_back(std::move(tk));
        ++n;
    }
    return out;
}

std::optional<Ticket> Ingestor::end_of_stream() {
    if (closed_) return std::nullopt;
    closed_ = true;
    if (auto b = batcher_.finish()) return submit_batch(*b);
    return std::nullopt;
}

Ticket call_oltp(Partition& p, const std::string& procedure, std::vector<Value> args) {
    const auto& def = p.workflow().get(procedure);
    if (def.kind != ProcedureKind::Oltp) fail(ErrorCode::WrongKind, procedure + " is not an OLTP procedure");
    return p.submit_client(TERequest{procedure, 0, encode_args(ProcArgs{std::move(args), std::nullopt}), Origin::Client});
}

} // namespace streamtx
