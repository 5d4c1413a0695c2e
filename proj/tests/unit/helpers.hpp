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
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "../oracles/schedule_oracle.hpp"
#include "streamtx/config.hpp"
#include "streamtx/error.hpp"
#include "streamtx/partition.hpp"
#include "streamtx/workload.hpp"

namespace testutil {

using namespace streamtx;

/// The error code `f` throws, or nullopt when it returns normally.
inline std::optional<ErrorCode> code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

inline std::shared_ptr<Catalog> catalog_from(const std::string& text) {
    return load_workload(ConfigDoc::parse(text)).catalog;
}

inline AtomicBatch batch(BatchId id, const std::vector<std::vector<Value>>& rows, std::int64_t ts = 0) {
    AtomicBatch b{id, {}};
    for (const auto& r : rows) b.tuples.push_back(Tuple{r, {0, id, ts}});
    return b;
}

inline std::vector<std::uint8_t> border_args(const AtomicBatch& b, std::vector<Value> values = {}) {
    ProcArgs a;
    a.values = std::move(values);
    a.batch = b;
    return encode_args(a);
}

inline oracle::Graph graph_of(const Workflow& w) {
    oracle::Graph g;
    for (const auto& p : w.procedures())
        if (is_streaming(p.kind)) g.nodes.push_back(p.name);
    for (const auto& e : w.edges()) g.edges.emplace_back(e.producer, e.consumer);
    for (const auto& n : w.chosen_order())
        if (is_streaming(w.get(n).kind)) g.chosen.push_back(n);
    for (const auto& grp : w.nested_groups())
        g.groups.push_back({{grp.children.begin(), grp.children.end()}, grp.partial_order});
    return g;
}

inline std::vector<oracle::Entry> entries_of(const Schedule& s) {
    std::vector<oracle::Entry> out;
    for (const auto& e : s.entries) out.emplace_back(e.procedure, e.round);
    return out;
}

inline std::vector<std::string> names_of(const Schedule& s) {
    std::vector<std::string> out;
    for (const auto& e : s.entries) out.push_back(e.procedure + "@" + std::to_string(e.round));
    return out;
}

/// Fresh, empty directory under the system temp dir; removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() / ("streamtx-" + tag + "-" + std::to_string(rng()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Two-procedure chain sp1 -> sp2 over stream s, each recording batch sums.
inline const char* kTwoChain = R"cfg(
[stream in]
schema = ["v:int"]
[stream s]
schema = ["v:int"]
[table log]
schema = ["s:int"]
[procedure sp1]
kind = "border"
inputs = ["in"]
outputs = ["s"]
tables = ["log"]
body = ["copy in -> s", "aggregate in sum(v) -> log"]
[procedure sp2]
kind = "interior"
inputs = ["s"]
tables = ["log"]
body = ["aggregate s sum(v) -> log"]
)cfg";

} // namespace testutil
