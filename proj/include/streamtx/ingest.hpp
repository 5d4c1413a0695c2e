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
#include <string>
#include <vector>

#include "streamtx/partition.hpp"

namespace streamtx {

struct BatchingPolicy {
    enum class Mode : std::uint8_t { FixedCount, SameTimestamp };
    Mode mode = Mode::FixedCount;
    std::size_t count = 1;

    static BatchingPolicy fixed(std::size_t k) { return {Mode::FixedCount, k}; }
    static BatchingPolicy by_timestamp() { return {Mode::SameTimestamp, 0}; }
};

/// Cuts a tuple feed into atomic batches with consecutive ids.
class Batcher {
public:
    explicit Batcher(BatchingPolicy policy, BatchId first = 1) : policy_(policy), next_(first) {}

    std::vector<AtomicBatch> push(Tuple t);
    /// Emits the partial batch, if any.
    std::optional<AtomicBatch> finish();
    BatchId next_batch_id() const { return next_; }

private:
    AtomicBatch cut();

    BatchingPolicy policy_;
    BatchId next_;
    std::vector<Tuple> buf_;
};

/// Feed file: CSV with a header naming the schema's columns, plus an optional
/// "ts" column. Blank lines and lines starting with '#' are skipped.
std::vector<Tuple> read_csv_feed(const std::filesystem::path& path, const Schema& schema);
std::vector<std::string> split_csv_line(std::string_view line);

/// Stream injection for one external stream of one partition. Each batch is
/// made durable in the input cache (weak mode) before its border TE is
/// submitted.
class Ingestor {
public:
    Ingestor(Partition& p, std::string stream, BatchingPolicy policy, BatchId first = 1);

    /// Throws SchemaMismatch or EngineStopped.
    std::vector<Ticket> push(std::vector<Value> values, std::int64_t ts = 0);
    /// Replays a feed; `rate` is tuples per second, 0 for full speed.
    std::vector<Ticket> push_all(const std::vector<Tuple>& feed, double rate = 0);
    std::optional<Ticket> end_of_stream();
    Ticket submit_batch(const AtomicBatch& b);

    bool closed() const { return closed_; }
    const std::string& border() const { return border_; }
    BatchId next_batch_id() const { return batcher_.next_batch_id(); }

private:
    Partition& p_;
    std::string stream_;
    std::string border_;
    const Schema& schema_;
    Batcher batcher_;
    bool closed_ = false;
};

/// Pull path for OLTP procedures. Throws UnknownProcedure or WrongKind.
Ticket call_oltp(Partition& p, const std::string& procedure, std::vector<Value> args);

} // namespace streamtx
