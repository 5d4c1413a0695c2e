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

// streamtx: command-line harness for the engine.
//
//   streamtx bench <ee|pe|window|leaderboard|recovery|scaling> --config <file> --out <json|csv>
//   streamtx run --config <file> [--dump-schedule <file>]
//   streamtx validate --schedule <file> --workflow <config>
//   streamtx recover --snapshot <file> --log <file> [--input-cache <file>] --config <file>
//
// Exit status: 0 when every check passes, 1 when a check fails, 2 on errors.

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "streamtx/bench.hpp"
#include "streamtx/config.hpp"
#include "streamtx/error.hpp"
#include "streamtx/recovery.hpp"
#include "streamtx/validator.hpp"
#include "streamtx/workload.hpp"

using namespace streamtx;
using json = nlohmann::json;

namespace {

std::vector<std::int64_t> ints(const ConfigSection& s, std::string_view key, std::vector<std::int64_t> def) {
    const auto* v = s.find(key);
    if (!v) return def;
    if (std::holds_alternative<std::int64_t>(v->v)) return {v->as_int()};
    std::vector<std::int64_t> out;
    for (const auto& x : v->as_list()) out.push_back(x.as_int());
    return out;
}

std::vector<std::string> strings(const ConfigSection& s, std::string_view key, std::vector<std::string> def) {
    const auto* v = s.find(key);
    if (!v) return def;
    if (std::holds_alternative<std::string>(v->v)) return {v->as_string()};
    return v->as_strings();
}

BenchOptions bench_options(const ConfigSection& s) {
    BenchOptions o;
    o.rounds = static_cast<std::uint64_t>(s.get_int("rounds", static_cast<std::int64_t>(o.rounds)));
    o.batch_size = static_cast<std::size_t>(s.get_int("batch_size", static_cast<std::int64_t>(o.batch_size)));
    o.warmup_fraction = s.get_double("warmup", o.warmup_fraction);
    o.seed = static_cast<std::uint64_t>(s.get_int("seed", static_cast<std::int64_t>(o.seed)));
    o.threaded = s.get_bool("threaded", o.threaded);
    if (o.rounds == 0 || o.batch_size == 0) fail(ErrorCode::ConfigError, "[bench] rounds and batch_size must be positive");
    return o;
}

EngineMode mode_word(const std::string& m) {
    if (m == "native") return EngineMode::Triggered;
    if (m == "emulated") return EngineMode::ClientDriven;
    return parse_engine_mode(m);
}

RecoveryMode recovery_word(const std::string& m) {
    auto r = parse_recovery_mode(m);
    if (!r) fail(ErrorCode::ConfigError, "unknown recovery mode " + m);
    return *r;
}

/// Adds a check to the faster report when `a` must beat `b`.
void directional(std::vector<MetricsReport>& rs, std::size_t a, std::size_t b, const std::string& label) {
    bool ok = rs[a].workflows_per_sec > rs[b].workflows_per_sec;
    std::ostringstream d;
    d << rs[a].workflows_per_sec << " vs " << rs[b].workflows_per_sec;
    rs[a].check("faster_than_" + label, ok, d.str());
}

std::vector<MetricsReport> bench_chain(const std::string& kind, const ConfigSection& s) {
    auto o = bench_options(s);
    bool require = s.get_bool("require_direction", true);
    std::vector<MetricsReport> out;
    if (kind == "ee" || kind == "pe") {
        s.allow_only({"stages", "modes", "rounds", "batch_size", "warmup", "seed", "threaded", "require_direction"});
        auto modes = strings(s, "modes", {"triggered", "client_driven"});
        for (auto k : ints(s, "stages", kind == "ee" ? std::vector<std::int64_t>{1, 3, 10} : std::vector<std::int64_t>{1, 2, 5})) {
            if (k < 1) fail(ErrorCode::ConfigError, "[bench] stages must be >= 1");
            std::size_t first = out.size();
            for (const auto& m : modes) {
                auto mode = parse_engine_mode(m);
                out.push_back(kind == "ee" ? run_ee_trigger_bench(k, mode, o) : run_pe_trigger_bench(k, mode, o));
            }
            if (out.size() - first == 2)
                out[first].check("same_final_state", out[first].stats["state_digest"] == out[first + 1].stats["state_digest"]);
            bool threshold = kind == "ee" ? k >= 3 : k >= 2;
            if (require && threshold && out.size() - first == 2 && out[first].mode != out[first + 1].mode)
                directional(out, out[first].mode == "triggered" ? first : first + 1,
                            out[first].mode == "triggered" ? first + 1 : first, "client_driven");
        }
    } else {
        s.allow_only({"sizes", "slide", "modes", "rounds", "batch_size", "warmup", "seed", "threaded", "require_direction"});
        auto modes = strings(s, "modes", {"native", "emulated"});
        auto slide = s.get_int("slide", 1);
        for (auto size : ints(s, "sizes", {10, 100, 1000})) {
            if (slide < 1 || slide > size) fail(ErrorCode::ConfigError, "[bench] slide must be in [1, size]");
            std::size_t first = out.size();
            for (const auto& m : modes) out.push_back(run_window_bench(size, slide, mode_word(m), o));
            if (out.size() - first == 2 && out[first].mode != out[first + 1].mode) {
                auto& a = out[first].mode == "native" ? out[first] : out[first + 1];
                auto& b = out[first].mode == "native" ? out[first + 1] : out[first];
                a.check("matches_emulated", a.stats["events"] == b.stats["events"] &&
                                                a.stats["event_checksum"] == b.stats["event_checksum"]);
                if (require && size >= 100) {
                    bool ok = a.workflows_per_sec >= b.workflows_per_sec;
                    std::ostringstream d;
                    d << a.workflows_per_sec << " vs " << b.workflows_per_sec;
                    a.check("not_slower_than_emulated", ok, d.str());
                }
            }
        }
    }
    return out;
}

std::vector<Vote> generated_votes(std::size_t n, std::int64_t contestants, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::int64_t> pick(1, contestants + 1);
    std::uniform_int_distribution<std::int64_t> phone(1, static_cast<std::int64_t>(n));
    std::vector<Vote> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({phone(rng), pick(rng)});
    return out;
}

std::vector<MetricsReport> bench_leaderboard(const ConfigSection& s, const std::filesystem::path& base) {
    s.allow_only({"contestants", "window", "removal_period", "votes", "generated_votes", "seed"});
    LeaderboardParams p;
    p.contestants = s.get_int("contestants", p.contestants);
    p.window = s.get_int("window", p.window);
    p.removal_period = s.get_int("removal_period", p.removal_period);
    std::vector<Vote> votes;
    if (auto file = s.get_string("votes", ""); !file.empty()) {
        std::filesystem::path path = file;
        if (path.is_relative() && !std::filesystem::exists(path)) path = base / path;
        votes = read_votes(path);
    } else {
        votes = generated_votes(s.get_int("generated_votes", 1000), p.contestants, s.get_int("seed", 1));
    }
    auto run = run_leaderboard(p, votes);
    return {run.report};
}

std::vector<MetricsReport> bench_recovery(const ConfigSection& s) {
    s.allow_only({"chain", "rounds", "batch_size", "modes", "crash", "group_commit_batch", "checkpoint_every", "dir",
                  "sync", "seed"});
    std::vector<MetricsReport> out;
    for (const auto& m : strings(s, "modes", {"strong", "weak"})) {
        for (const auto& c : strings(s, "crash", {"after-round:7", "mid-flush:13:5"})) {
            RecoveryExperiment e;
            e.n = s.get_int("chain", static_cast<std::int64_t>(e.n));
            e.rounds = s.get_int("rounds", static_cast<std::int64_t>(e.rounds));
            e.batch_size = s.get_int("batch_size", static_cast<std::int64_t>(e.batch_size));
            e.mode = recovery_word(m);
            e.crash = CrashPoint::parse(c);
            e.group_commit_batch = s.get_int("group_commit_batch", static_cast<std::int64_t>(e.group_commit_batch));
            e.checkpoint_every = s.get_int("checkpoint_every", static_cast<std::int64_t>(e.checkpoint_every));
            e.dir = s.get_string("dir", e.dir.string());
            e.sync = s.get_bool("sync", e.sync);
            e.seed = s.get_int("seed", static_cast<std::int64_t>(e.seed));
            out.push_back(run_recovery_experiment(e).report);
        }
    }
    return out;
}

std::vector<MetricsReport> bench_scaling(const ConfigSection& s) {
    s.allow_only({"partitions", "stages", "tuples", "batch_size", "keys", "mode", "dir", "sync", "seed", "warmup",
                  "require_direction"});
    ScalingOptions o;
    o.stages = s.get_int("stages", static_cast<std::int64_t>(o.stages));
    o.tuples = s.get_int("tuples", static_cast<std::int64_t>(o.tuples));
    o.batch_size = s.get_int("batch_size", static_cast<std::int64_t>(o.batch_size));
    o.keys = s.get_int("keys", static_cast<std::int64_t>(o.keys));
    o.mode = recovery_word(s.get_string("mode", std::string(to_string(o.mode))));
    o.dir = s.get_string("dir", o.dir.string());
    o.sync = s.get_bool("sync", o.sync);
    o.seed = s.get_int("seed", static_cast<std::int64_t>(o.seed));
    o.warmup_fraction = s.get_double("warmup", o.warmup_fraction);
    bool require = s.get_bool("require_direction", true);
    std::vector<MetricsReport> out;
    std::vector<std::vector<Value>> reference;
    for (auto p : ints(s, "partitions", {1, 2, 4})) {
        if (p < 1) fail(ErrorCode::ConfigError, "[bench] partitions must be >= 1");
        auto run = run_partition_scaling(static_cast<std::uint32_t>(p), o);
        if (out.empty()) reference = run.outputs;
        else run.report.check("outputs_match_first", run.outputs == reference);
        if (require && !out.empty()) {
            bool ok = run.report.workflows_per_sec >= out.back().workflows_per_sec;
            std::ostringstream d;
            d << run.report.workflows_per_sec << " vs " << out.back().workflows_per_sec;
            run.report.check("throughput_non_decreasing", ok, d.str());
        }
        out.push_back(std::move(run.report));
    }
    return out;
}

const ConfigSection& bench_section(const ConfigDoc& doc, const std::string& kind) {
    static const ConfigSection empty{"bench", "", {}, 0};
    if (const auto* s = doc.find("bench", kind)) return *s;
    if (const auto* s = doc.find("bench", "")) return *s;
    return empty;
}

void emit(const std::vector<MetricsReport>& rs, const std::string& format, const std::string& file) {
    std::string text = format == "csv" ? reports_to_csv(rs) : reports_to_json(rs) + "\n";
    if (file.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(file);
    if (!f) fail(ErrorCode::IOFailure, "cannot write " + file);
    f << text;
}

int status_of(const std::vector<MetricsReport>& rs) {
    for (const auto& r : rs)
        for (const auto& c : r.checks)
            if (!c.passed) {
                std::cerr << "check failed: " << r.bench << "/" << r.mode << " " << c.name
                          << (c.detail.empty() ? "" : " (" + c.detail + ")") << "\n";
            }
    return std::all_of(rs.begin(), rs.end(), [](const MetricsReport& r) { return r.passed(); }) ? 0 : 1;
}

Schedule read_schedule(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IOFailure, "cannot read " + path.string());
    Schedule s;
    std::string line;
    std::size_t lineno = 0;
    CommitSeq seq = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        if (lineno == 1 && !cells.empty() && cells[0] == "procedure") continue;
        if (cells.size() < 2 || cells.size() > 3)
            fail(ErrorCode::ConfigError, path.string() + ":" + std::to_string(lineno) + ": expected procedure,round[,seq]");
        TransactionExecution te;
        te.procedure = cells[0];
        try {
            te.round = std::stoull(cells[1]);
            te.commit_seq = cells.size() == 3 ? std::stoull(cells[2]) : ++seq;
        } catch (const std::exception&) {
            fail(ErrorCode::ConfigError, path.string() + ":" + std::to_string(lineno) + ": bad number");
        }
        s.entries.push_back(std::move(te));
    }
    std::stable_sort(s.entries.begin(), s.entries.end(),
                     [](const auto& a, const auto& b) { return a.commit_seq < b.commit_seq; });
    return s;
}

void write_schedule(const Schedule& s, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IOFailure, "cannot write " + path.string());
    out << "procedure,round,seq\n";
    for (const auto& te : s.entries) out << te.procedure << "," << te.round << "," << te.commit_seq << "\n";
}

json report_json(const ValidationReport& r) {
    json j;
    j["correct"] = r.correct();
    j["violations"] = json::array();
    for (const auto& v : r.violations)
        j["violations"].push_back(
            {{"kind", to_string(v.kind)}, {"first", v.first}, {"second", v.second}, {"round", v.round}});
    return j;
}

json report_json(const RecoveryReport& r) {
    return {{"mode", to_string(r.mode)},
            {"snapshot", r.snapshot ? r.snapshot->string() : ""},
            {"snapshot_seq", r.snapshot_seq},
            {"log_records", r.log_records},
            {"abort_markers", r.abort_markers},
            {"replayed", r.replayed},
            {"replayed_to", r.replayed_to},
            {"truncated_bytes", r.truncated_bytes},
            {"refired", r.refired},
            {"reinjected", r.reinjected},
            {"client_path_replays", r.client_path_replays},
            {"trigger_dispatches", r.trigger_dispatches},
            {"millis", r.millis}};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"streamtx: transactional stream processing engine"};
    app.require_subcommand(1);

    std::string config, out_format = "json", out_file;
    std::string bench_kind;
    auto* bench = app.add_subcommand("bench", "Run a built-in experiment");
    bench->add_option("kind", bench_kind, "Experiment")
        ->required()
        ->check(CLI::IsMember({"ee", "pe", "window", "leaderboard", "recovery", "scaling"}));
    bench->add_option("--config", config, "Config file with a [bench] section")->check(CLI::ExistingFile);
    bench->add_option("--out", out_format, "Report format")->check(CLI::IsMember({"json", "csv"}));
    bench->add_option("--output", out_file, "Write the report here instead of stdout");

    std::string dump_schedule;
    auto* run = app.add_subcommand("run", "Run a workload described by a config file");
    run->add_option("--config", config, "Workload config")->required()->check(CLI::ExistingFile);
    run->add_option("--dump-schedule", dump_schedule, "Write the committed schedule as CSV");
    run->add_option("--out", out_format, "Report format")->check(CLI::IsMember({"json", "csv"}));

    std::string schedule_file, workflow_file, vmode = "fixed";
    auto* val = app.add_subcommand("validate", "Check a schedule against a workflow");
    val->add_option("--schedule", schedule_file, "CSV: procedure,round[,seq]")->required()->check(CLI::ExistingFile);
    val->add_option("--workflow", workflow_file, "Workload config")->required()->check(CLI::ExistingFile);
    val->add_option("--mode", vmode, "fixed: the chosen order; any: any topological order")
        ->check(CLI::IsMember({"fixed", "any"}));

    std::string snapshot, log, input_cache;
    bool dump_state = false;
    auto* rec = app.add_subcommand("recover", "Rebuild state from a snapshot and command log");
    rec->add_option("--snapshot", snapshot, "Snapshot file");
    rec->add_option("--log", log, "Command log")->required()->check(CLI::ExistingFile);
    rec->add_option("--input-cache", input_cache, "Input cache (weak mode)");
    rec->add_option("--config", config, "Workload config the log was written by")->required()->check(CLI::ExistingFile);
    rec->add_flag("--dump-state", dump_state, "Include table contents in the report");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*bench) {
            ConfigDoc doc = config.empty() ? ConfigDoc{} : ConfigDoc::load(config);
            const auto& s = bench_section(doc, bench_kind);
            auto base = config.empty() ? std::filesystem::path(".") : std::filesystem::path(config).parent_path();
            std::vector<MetricsReport> rs;
            if (bench_kind == "ee" || bench_kind == "pe" || bench_kind == "window") rs = bench_chain(bench_kind, s);
            else if (bench_kind == "leaderboard") rs = bench_leaderboard(s, base);
            else if (bench_kind == "recovery") rs = bench_recovery(s);
            else rs = bench_scaling(s);
            emit(rs, out_format, out_file);
            return status_of(rs);
        }
        if (*run) {
            auto wc = load_workload(ConfigDoc::load(config));
            Schedule sched;
            auto r = run_workload(wc, dump_schedule.empty() ? nullptr : &sched);
            if (!dump_schedule.empty()) write_schedule(sched, dump_schedule);
            emit({r}, out_format, "");
            return status_of({r});
        }
        if (*val) {
            auto wc = load_workload(ConfigDoc::load(workflow_file));
            auto s = read_schedule(schedule_file);
            auto r = validate(s, wc.catalog->workflow(), vmode == "any" ? ValidationMode::AnyTopological : ValidationMode::FixedOrder);
            auto j = report_json(r);
            j["entries"] = s.entries.size();
            std::cout << j.dump(2) << "\n";
            return r.correct() ? 0 : 1;
        }
        if (*rec) {
            auto wc = load_workload(ConfigDoc::load(config));
            if (wc.engine.partitions != 1) fail(ErrorCode::ConfigError, "recover works on one partition's files");
            RecoveryPaths paths;
            paths.log = log;
            if (!snapshot.empty()) paths.snapshot = snapshot;
            if (!input_cache.empty()) paths.input_cache = input_cache;
            auto opts = partition_options(wc.engine, 0, std::filesystem::path(log).parent_path());
            opts.mode = RecoveryMode::None;
            opts.dir.clear();
            Partition p(wc.catalog, opts);
            auto r = recover(p, paths);
            p.run_until_idle();
            auto j = report_json(r);
            j["tables"] = json::object();
            for (const auto& t : wc.catalog->tables()) {
                auto rows = sorted_rows(p.db(), t.name);
                if (!dump_state) {
                    j["tables"][t.name] = rows.size();
                    continue;
                }
                auto arr = json::array();
                for (const auto& row : rows) {
                    auto cells = json::array();
                    for (const auto& v : row) cells.push_back(to_string(v));
                    arr.push_back(cells);
                }
                j["tables"][t.name] = arr;
            }
            std::cout << j.dump(2) << "\n";
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
