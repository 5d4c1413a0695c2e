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

#include "streamtx/partitioned.hpp"

#include <cstring>

#include "streamtx/error.hpp"

namespace streamtx {

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t key_hash(const Value& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return mix(static_cast<std::uint64_t>(*i));
    if (const auto* d = std::get_if<double>(&v)) {
        std::uint64_t bits;
        std::memcpy(&bits, d, sizeof bits);
        return mix(bits);
    }
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : std::get<std::string>(v)) h = (h ^ c) * 0x100000001b3ULL;
    return mix(h);
}

PartitionedEngine::PartitionedEngine(std::shared_ptr<const Catalog> catalog, std::uint32_t partitions, std::string key,
                                     PartitionOptions base, BatchingPolicy policy)
    : catalog_(std::move(catalog)), key_(std::move(key)), policy_(policy) {
    if (partitions < 1) fail(ErrorCode::ConfigError, "need at least one partition");
    if (partitions > 1 && !catalog_->partitionable())
        fail(ErrorCode::NotPartitionable, "workload shares public tables across partitions");
    if (partitions > 1 || !key_.empty())
        for (const auto& s : catalog_->streams())
            if (catalog_->is_external(s.name) && !catalog_->workflow().consumer_of(s.name).empty())
                s.schema.require(key_);
    for (std::uint32_t i = 0; i < partitions; ++i) {
        PartitionOptions o = base;
        o.id = i;
        if (!base.dir.empty()) o.dir = base.dir / ("p" + std::to_string(i));
        parts_.push_back(std::make_unique<Partition>(catalog_, o));
    }
    ingestors_.resize(partitions);
}

PartitionedEngine::~PartitionedEngine() { stop(); }

Ingestor& PartitionedEngine::ingestor(std::size_t part, const std::string& stream) {
    auto& slot = ingestors_[part][stream];
    if (!slot) {
        auto it = policies_.find(stream);
        slot = std::make_unique<Ingestor>(*parts_[part], stream, it == policies_.end() ? policy_ : it->second);
    }
    return *slot;
}

std::vector<Ticket> PartitionedEngine::push(const std::string& stream, std::vector<Value> values, std::int64_t ts) {
    if (parts_.size() == 1) return ingestor(0, stream).push(std::move(values), ts);
    const auto& schema = catalog_->stream_schema(stream);
    auto col = schema.require(key_);
    if (col >= values.size()) fail(ErrorCode::SchemaMismatch, "tuple for " + stream + " lacks key column " + key_);
    return ingestor(route(values[col]), stream).push(std::move(values), ts);
}

std::vector<Ticket> PartitionedEngine::end_of_streams() {
    std::vector<Ticket> out;
    for (auto& per : ingestors_)
        for (auto& [name, ing] : per)
            if (auto t = ing->end_of_stream()) out.push_back(*t);
    return out;
}

void PartitionedEngine::start() {
    for (auto& p : parts_) p->start();
}

void PartitionedEngine::stop() {
    for (auto& p : parts_) p->stop();
}

void PartitionedEngine::run_until_idle() {
    for (auto& p : parts_) p->run_until_idle();
}

void PartitionedEngine::drain_and_quiesce() {
    for (auto& p : parts_) {
        p->drain_and_quiesce();
        p->resume();
    }
}

} // namespace streamtx
