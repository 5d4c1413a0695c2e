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
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "streamtx/ingest.hpp"
#include "streamtx/partition.hpp"

namespace streamtx {

/// Stable hash of a partition key; identical across runs and hosts.
std::uint64_t key_hash(const Value& v);

/// p independent partitions over one workload. Each external tuple is routed
/// by the hash of its key column; each partition batches, logs and snapshots
/// on its own (directory <base>/p<i>).
class PartitionedEngine {
public:
    /// Throws NotPartitionable when p > 1 and the workload has public tables,
    /// UnknownColumn when an external stream lacks the key column. With one
    /// partition the key may be empty.
    PartitionedEngine(std::shared_ptr<const Catalog> catalog, std::uint32_t partitions, std::string key,
                      PartitionOptions base, BatchingPolicy policy);
    ~PartitionedEngine();

    std::size_t size() const { return parts_.size(); }
    Partition& partition(std::size_t i) { return *parts_.at(i); }
    std::size_t route(const Value& key) const { return key_hash(key) % parts_.size(); }

    /// Batching for one stream; others use the constructor's policy.
    void set_policy(const std::string& stream, BatchingPolicy policy) { policies_[stream] = policy; }

    std::vector<Ticket> push(const std::string& stream, std::vector<Value> values, std::int64_t ts = 0);
    std::vector<Ticket> end_of_streams();

    void start();
    void stop();
    void run_until_idle();
    void drain_and_quiesce();

private:
    Ingestor& ingestor(std::size_t part, const std::string& stream);

    std::shared_ptr<const Catalog> catalog_;
    std::string key_;
    BatchingPolicy policy_;
    std::map<std::string, BatchingPolicy> policies_;
    std::vector<std::unique_ptr<Partition>> parts_;
    std::vector<std::map<std::string, std::unique_ptr<Ingestor>>> ingestors_;
};

} // namespace streamtx
