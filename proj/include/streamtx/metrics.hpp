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

#include <atomic>
#include <cstdint>
#include <map>
#include <string>

namespace streamtx {

struct CounterValues {
    std::uint64_t te_committed = 0;
    std::uint64_t te_aborted = 0;
    std::uint64_t client_roundtrips = 0;
    std::uint64_t pe_dispatches = 0;
    std::uint64_t trigger_dispatches = 0;
    std::uint64_t ee_statement_executions = 0;
    std::uint64_t boundary_crossings = 0;
    std::uint64_t log_records = 0;
    std::uint64_t log_abort_records = 0;
    std::uint64_t sync_count = 0;
    std::uint64_t timer_flushes = 0;
    std::uint64_t recovery_replays = 0;
    std::uint64_t input_cache_appends = 0;
    std::uint64_t max_concurrent_te = 0;

    std::map<std::string, std::uint64_t> as_map() const;
    CounterValues operator-(const CounterValues& o) const;
};

/// Per-partition counters. Written by the executor, readable from any thread.
struct Counters {
    std::atomic<std::uint64_t> te_committed{0};
    std::atomic<std::uint64_t> te_aborted{0};
    std::atomic<std::uint64_t> client_roundtrips{0};
    std::atomic<std::uint64_t> pe_dispatches{0};
    std::atomic<std::uint64_t> trigger_dispatches{0};
    std::atomic<std::uint64_t> ee_statement_executions{0};
    std::atomic<std::uint64_t> boundary_crossings{0};
    std::atomic<std::uint64_t> log_records{0};
    std::atomic<std::uint64_t> log_abort_records{0};
    std::atomic<std::uint64_t> sync_count{0};
    std::atomic<std::uint64_t> timer_flushes{0};
    std::atomic<std::uint64_t> recovery_replays{0};
    std::atomic<std::uint64_t> input_cache_appends{0};
    std::atomic<std::uint64_t> max_concurrent_te{0};
    std::atomic<std::uint64_t> running_te{0};

    CounterValues load() const;
};

} // namespace streamtx
