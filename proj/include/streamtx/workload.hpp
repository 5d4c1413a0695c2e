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
#include <random>
#include <string>
#include <vector>

#include "streamtx/catalog.hpp"
#include "streamtx/command_log.hpp"
#include "streamtx/config.hpp"
#include "streamtx/partition.hpp"

namespace streamtx {

/// triggered: PE/EE triggers drive the workflow. client_driven: the client
/// submits every TE itself and waits for each outcome.
enum class EngineMode : std::uint8_t { Triggered, ClientDriven };

std::string_view to_string(EngineMode m);
EngineMode parse_engine_mode(std::string_view s);

/// Column list spelled "name:type".
Schema parse_schema(const std::vector<std::string>& columns);
std::vector<std::string> format_schema(const Schema& s);

/// Inverse of describe().
Statement parse_statement(std::string_view text);

/// Builds a procedure body from one operation per string:
///
///     copy SRC -> DST [where PRED]
///     delete TABLE [where PRED]
///     abort_if SRC [where PRED]
///     insert_args TABLE
///     aggregate SRC OP(COL) [by COL] -> DST
///     aggregate_events NAME OP(COL) [by COL] -> DST
///     emulate_window SRC -> ROWS META SIZE SLIDE
///     query TABLE [where PRED]
///
/// SRC is an input stream (the current batch), a table or a window (active
/// contents). Copying into a window records its events under the window's
/// name; emulate_window keeps a window in two ordinary tables and records its
/// events under ROWS. aggregate_events aggregates each recorded event.
ProcedureBody compile_body(const std::vector<std::string>& ops);

struct EngineConfig {
    EngineMode mode = EngineMode::Triggered;
    RecoveryMode recovery = RecoveryMode::None;
    std::filesystem::path dir = "streamtx-data";
    std::size_t group_commit_batch = 1;
    std::chrono::microseconds group_commit_delay{0};
    bool sync = true;
    std::uint32_t partitions = 1;
    std::string partition_key;
    std::size_t queue_bound = 0;
    /// Checkpoint after every N rounds; 0 disables.
    std::uint64_t checkpoint_every = 0;
};

struct FeedSpec {
    std::string name;
    std::string stream;
    /// CSV replay when set, otherwise a seeded generator.
    std::string file;
    std::uint64_t tuples = 0;
    std::uint64_t seed = 1;
    std::int64_t min_value = 0;
    std::int64_t max_value = 999;
    std::size_t batch_size = 1;
    bool batch_by_ts = false;
    double rate = 0;
};

struct WorkloadConfig {
    EngineConfig engine;
    std::shared_ptr<Catalog> catalog;
    std::vector<FeedSpec> feeds;
    /// The [bench] section, empty when absent.
    ConfigSection bench;
};

/// Validates every section and builds a finalized catalog. Throws ConfigError
/// or the catalog's registration errors.
WorkloadConfig load_workload(const ConfigDoc& doc);

PartitionOptions partition_options(const EngineConfig& e, std::uint32_t id, const std::filesystem::path& dir);

/// Tuples for a generated feed: the schema's int columns drawn uniformly from
/// [min_value, max_value], float columns likewise, text as "t<n>".
std::vector<Tuple> generate_feed(const FeedSpec& f, const Schema& schema);
std::vector<Tuple> load_feed(const FeedSpec& f, const Schema& schema);

// ---------------------------------------------------------------------------
// Built-in workloads, expressed as config documents.

/// k filtered-copy stages. Triggered: one border procedure whose input stream
/// carries a statement-trigger chain ee_in -> ee_s1 -> ... -> ee_out.
/// Client-driven: k procedures ee_p1..ee_pk, one stage each.
ConfigDoc ee_chain_doc(std::size_t k, EngineMode mode);

/// n procedures pe_p1 -> ... -> pe_pn linked by streams. Each stage forwards
/// its batch and records the batch sum in table pe_sums; the last stage copies
/// the batch into pe_out.
ConfigDoc pe_chain_doc(std::size_t n);

/// One border procedure feeding a window (native) or its two-table emulation,
/// writing count and sum of every event to win_count and win_sum.
ConfigDoc window_doc(std::size_t size, std::size_t slide, EngineMode mode);

/// Table-free chain of `stages` procedures over stream sc_in(k, v) ending in
/// the sink stream sc_out; partitionable on k.
ConfigDoc scaling_doc(std::size_t stages);

struct RandomWorkflowOptions {
    std::size_t max_procedures = 4;
    double edge_probability = 0.5;
    double abort_probability = 0.3;
    double filter_probability = 0.3;
    double group_probability = 0.4;
    bool oltp = true;
};

/// A random DAG over single-consumer streams with order-insensitive bodies
/// that write into table acc; aborts and empty outputs are data driven.
/// Borders read external streams x_<name>. Adds OLTP procedures oltp_read and
/// oltp_write when enabled.
ConfigDoc random_workflow_doc(std::mt19937_64& rng, const RandomWorkflowOptions& opts = {});

} // namespace streamtx
