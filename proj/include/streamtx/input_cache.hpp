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
#include <map>
#include <memory>
#include <string>

#include "streamtx/command_log.hpp"

namespace streamtx {

/// Upstream backup: every external batch is made durable here before its
/// border TE is submitted, and kept until its whole round has committed.
class InputCache {
public:
    InputCache(const std::filesystem::path& path, std::uint32_t partition, bool sync, Counters& counters);

    /// Appends and syncs. Returns once the batch is durable.
    void append(const std::string& stream, const AtomicBatch& batch);

    /// Drops retained batches with round <= low_water. Monotone; returns the
    /// number removed.
    std::size_t trim(Round low_water);
    Round low_water() const { return low_water_; }

    /// Rewrites the file to hold exactly the retained batches.
    void rewrite();

    const std::map<std::string, std::map<Round, AtomicBatch>>& retained() const { return retained_; }
    std::size_t size() const;

    /// Reads a cache file without opening it for writing.
    static std::map<std::string, std::map<Round, AtomicBatch>> load(const std::filesystem::path& path);

private:
    std::filesystem::path path_;
    std::uint32_t partition_;
    bool sync_;
    Counters& counters_;
    std::unique_ptr<DurableFile> file_;
    std::map<std::string, std::map<Round, AtomicBatch>> retained_;
    Round low_water_ = 0;
    std::uint64_t next_ordinal_ = 1;
};

} // namespace streamtx
