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

#include "streamtx/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "streamtx/error.hpp"
#include "streamtx/ingest.hpp"
#include "streamtx/partitioned.hpp"
#include "streamtx/validator.hpp"

namespace streamtx {

using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------------------
// Reports

void MetricsReport::check(std::string name, bool ok, std::string detail) {
    checks.push_back({std::move(name), ok, std::move(detail)});
}

bool MetricsReport::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

namespace {

nlohmann::json report_json(const MetricsReport& r) {
    nlohmann::json j;
    j["bench"] = r.bench;
    j["mode"] = r.mode;
    j["params"] = nlohmann::json::object();
    for (const auto& [k, v] : r.params) j["params"][k] = v;
    j["workflows"] = r.workflows;
    j["tes"] = r.tes;
    j["seconds"] = r.seconds;
    j["workflows_per_sec"] = r.workflows_per_sec;
    j["tes_per_sec"] = r.tes_per_sec;
    j["latency_us"] = {{"p50", r.latency_p50_us}, {"p95", r.latency_p95_us}, {"p99", r.latency_p99_us}};
    j["counters"] = r.counters.as_map();
    j["stats"] = r.stats;
    j["checks"] = nlohmann::json::array();
    for (const auto& c : r.checks) j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    j["passed"] = r.passed();
    return j;
}

std::string num(double d) {
    std::ostringstream os;
    os << d;
    return os.str();
}

} // namespace

std::string MetricsReport::to_json() const { return report_json(*this).dump(2); }

std::string MetricsReport::to_csv() const {
    std::string out;
    auto line = [&](const std::string& k, const std::string& v) { out += bench + "," + mode + "," + k + "," + v + "\n"; };
    for (const auto& [k, v] : params) line("param." + k, v);
    line("workflows", std::to_string(workflows));
    line("tes", std::to_string(tes));
    line("seconds", num(seconds));
    line("workflows_per_sec", num(workflows_per_sec));
    line("tes_per_sec", num(tes_per_sec));
    line("latency_p50_us", num(latency_p50_us));
    line("latency_p95_us", num(latency_p95_us));
    line("latency_p99_us", num(latency_p99_us));
    for (const auto& [k, v] : counters.as_map()) line("counter." + k, std::to_string(v));
    for (const auto& [k, v] : stats) line("stat." + k, num(v));
    for (const auto& c : checks) line("check." + c.name, c.passed ? "pass" : "fail");
    return out;
}

std::string reports_to_json(const std::vector<MetricsReport>& rs) {
    auto arr = nlohmann::json::array();
    for (const auto& r : rs) arr.push_back(report_json(r));
    return arr.dump(2);
}

std::string reports_to_csv(const std::vector<MetricsReport>& rs) {
    std::string out = "bench,mode,key,value\n";
    for (const auto& r : rs) out += r.to_csv();
    return out;
}

double percentile(std::vector<double> xs, double q) {
    if (xs.empty()) return 0;
    std::sort(xs.begin(), xs.end());
    auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(xs.size()))) ;
    return xs[std::min(xs.size() - 1, idx == 0 ? 0 : idx - 1)];
}

std::vector<std::vector<Value>> sorted_rows(const Database& db, std::string_view table) {
    std::vector<std::vector<Value>> out;
    for (const auto& [id, t] : db.public_table(table).rows()) out.push_back(t.values);
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Chain driver shared by the EE, PE and window benches

namespace {

double micros(Clock::duration d) { return std::chrono::duration<double, std::micro>(d).count(); }

Outcome await(Partition& p, const Ticket& t) {
    if (!p.running()) p.run_until_idle();
    return t.get();
}

std::vector<AtomicBatch> cut_batches(const std::vector<Tuple>& feed, std::size_t batch_size) {
    Batcher b(BatchingPolicy::fixed(batch_size));
    std::vector<AtomicBatch> out;
    for (const auto& t : feed)
        for (auto& x : b.push(t)) out.push_back(std::move(x));
    if (auto last = b.finish()) out.push_back(std::move(*last));
    return out;
}

bool internal_streams_empty(const Partition& p) {
    const auto& w = p.workflow();
    for (const auto& s : p.catalog().streams()) {
        bool sink = !w.producer_of(s.name).empty() && w.consumer_of(s.name).empty();
        if (!sink && !p.db().stream_empty(s.name)) return false;
    }
    return true;
}

double state_digest(const Catalog& cat, const Database& db) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& t : cat.tables()) {
        std::string text = t.name;
        for (const auto& row : sorted_rows(db, t.name))
            for (const auto& v : row) text += "|" + to_string(v);
        h = (h ^ std::hash<std::string>{}(text)) * 1099511628211ull;
    }
    return static_cast<double>(h >> 12);
}

void add_counters(CounterValues& a, const CounterValues& b) {
    a.te_committed += b.te_committed;
    a.te_aborted += b.te_aborted;
    a.client_roundtrips += b.client_roundtrips;
    a.pe_dispatches += b.pe_dispatches;
    a.trigger_dispatches += b.trigger_dispatches;
    a.ee_statement_executions += b.ee_statement_executions;
    a.boundary_crossings += b.boundary_crossings;
    a.log_records += b.log_records;
    a.log_abort_records += b.log_abort_records;
    a.sync_count += b.sync_count;
    a.timer_flushes += b.timer_flushes;
    a.recovery_replays += b.recovery_replays;
    a.input_cache_appends += b.input_cache_appends;
    a.max_concurrent_te = std::max(a.max_concurrent_te, b.max_concurrent_te);
}

struct ChainResult {
    std::unique_ptr<Partition> partition;
    std::uint64_t measured = 0;
    std::uint64_t failed = 0;
};

/// Feeds `rounds` batches to the single border procedure of `cat` and, in
/// client-driven mode, submits every downstream procedure itself, waiting for
/// each outcome. Fills timing, latency and counter deltas into `r`.
ChainResult drive_chain(std::shared_ptr<const Catalog> cat, EngineMode mode, const BenchOptions& o,
                        const std::string& input, MetricsReport& r) {
    ChainResult res;
    PartitionOptions po;
    po.queue_bound = 4096;
    po.schedule_retention = 0;
    res.partition = std::make_unique<Partition>(cat, po);
    Partition& p = *res.partition;
    if (mode == EngineMode::ClientDriven) p.set_pe_triggers_enabled(false);

    std::vector<std::string> chain;
    for (const auto& name : p.workflow().chosen_order())
        if (is_streaming(p.workflow().get(name).kind)) chain.push_back(name);
    const std::string sink = chain.back();

    FeedSpec fs;
    fs.tuples = o.rounds * o.batch_size;
    fs.seed = o.seed;
    auto batches = cut_batches(generate_feed(fs, cat->stream_schema(input)), o.batch_size);
    const std::uint64_t rounds = batches.size();

    std::vector<Clock::time_point> submitted(rounds + 1), done(rounds + 1);
    p.set_commit_observer([&](const TransactionExecution& te, const Database&) {
        if (te.procedure == sink && te.round <= rounds) done[te.round] = Clock::now();
    });

    Ingestor ing(p, input, BatchingPolicy::fixed(o.batch_size));
    std::vector<Ticket> tickets;
    auto run_round = [&](Round rd) {
        submitted[rd] = Clock::now();
        auto t = ing.submit_batch(batches[rd - 1]);
        if (mode == EngineMode::Triggered) {
            tickets.push_back(t);
            return;
        }
        if (!await(p, t).committed) {
            ++res.failed;
            return;
        }
        for (std::size_t i = 1; i < chain.size(); ++i)
            if (!await(p, p.submit_client(TERequest{chain[i], rd, {}, Origin::Client})).committed) {
                ++res.failed;
                return;
            }
    };
    auto finish_phase = [&] {
        p.wait_idle();
        for (const auto& t : tickets)
            if (!t.get().committed) ++res.failed;
        tickets.clear();
    };

    if (o.threaded) p.start();
    const auto warm = rounds > 1 ? std::min<std::uint64_t>(rounds - 1, static_cast<std::uint64_t>(o.warmup_fraction * rounds)) : 0;
    for (Round rd = 1; rd <= warm; ++rd) run_round(rd);
    finish_phase();
    auto c0 = p.counters();
    auto t0 = Clock::now();
    for (Round rd = warm + 1; rd <= rounds; ++rd) run_round(rd);
    finish_phase();
    auto t1 = Clock::now();
    p.stop();
    auto c1 = p.counters();

    res.measured = rounds - warm;
    r.workflows = res.measured;
    r.counters = c1 - c0;
    r.tes = r.counters.te_committed;
    r.seconds = std::chrono::duration<double>(t1 - t0).count();
    r.workflows_per_sec = r.seconds > 0 ? static_cast<double>(r.workflows) / r.seconds : 0;
    r.tes_per_sec = r.seconds > 0 ? static_cast<double>(r.tes) / r.seconds : 0;
    std::vector<double> lat;
    for (Round rd = warm + 1; rd <= rounds; ++rd)
        if (done[rd] != Clock::time_point{}) lat.push_back(micros(done[rd] - submitted[rd]));
    r.latency_p50_us = percentile(lat, 0.50);
    r.latency_p95_us = percentile(lat, 0.95);
    r.latency_p99_us = percentile(lat, 0.99);
    r.stats["warmup_rounds"] = static_cast<double>(warm);
    r.stats["failed_rounds"] = static_cast<double>(res.failed);
    r.stats["state_digest"] = state_digest(*cat, p.db());
    r.param("rounds", std::to_string(rounds));
    r.param("batch_size", std::to_string(o.batch_size));
    r.param("threaded", o.threaded ? "true" : "false");

    auto rep = validate(p.committed_schedule(), p.workflow(), ValidationMode::FixedOrder);
    r.check("schedule_valid", rep.correct(), std::to_string(rep.violations.size()) + " violations");
    r.check("serial_execution", c1.max_concurrent_te <= 1, "max concurrent " + std::to_string(c1.max_concurrent_te));
    r.check("streams_collected", internal_streams_empty(p));
    r.check("no_failed_rounds", res.failed == 0, std::to_string(res.failed));
    return res;
}

void exact(MetricsReport& r, const std::string& name, std::uint64_t got, std::uint64_t want) {
    r.check(name, got == want, "got " + std::to_string(got) + ", expected " + std::to_string(want));
}

} // namespace

MetricsReport run_ee_trigger_bench(std::size_t k, EngineMode mode, const BenchOptions& o) {
    MetricsReport r;
    r.bench = "ee";
    r.mode = std::string(to_string(mode));
    r.param("stages", std::to_string(k));
    auto wc = load_workload(ee_chain_doc(k, mode));
    auto res = drive_chain(wc.catalog, mode, o, "ee_in", r);
    const auto m = res.measured;
    const bool trig = mode == EngineMode::Triggered;
    exact(r, "pe_dispatches", r.counters.pe_dispatches, trig ? m : k * m);
    exact(r, "client_roundtrips", r.counters.client_roundtrips, trig ? m : k * m);
    exact(r, "ee_statement_executions", r.counters.ee_statement_executions, trig ? k * m : 0);
    r.stats["dispatches_per_batch"] = m ? static_cast<double>(r.counters.pe_dispatches) / m : 0;
    r.stats["roundtrips_per_batch"] = m ? static_cast<double>(r.counters.client_roundtrips) / m : 0;
    const auto& db = res.partition->db();
    r.stats["out_rows"] = static_cast<double>(db.public_table("ee_out").rows().size());
    exact(r, "out_rows", db.public_table("ee_out").rows().size(), o.rounds * o.batch_size);
    return r;
}

MetricsReport run_pe_trigger_bench(std::size_t n, EngineMode mode, const BenchOptions& o) {
    MetricsReport r;
    r.bench = "pe";
    r.mode = std::string(to_string(mode));
    r.param("chain", std::to_string(n));
    auto wc = load_workload(pe_chain_doc(n));
    auto res = drive_chain(wc.catalog, mode, o, "pe_in", r);
    const auto m = res.measured;
    const bool trig = mode == EngineMode::Triggered;
    exact(r, "client_roundtrips", r.counters.client_roundtrips, trig ? m : n * m);
    exact(r, "pe_dispatches", r.counters.pe_dispatches, n * m);
    exact(r, "trigger_dispatches", r.counters.trigger_dispatches, trig ? (n - 1) * m : 0);
    r.stats["roundtrips_per_workflow"] = m ? static_cast<double>(r.counters.client_roundtrips) / m : 0;
    const auto& db = res.partition->db();
    exact(r, "out_rows", db.public_table("pe_out").rows().size(), o.rounds * o.batch_size);
    exact(r, "sum_rows", db.public_table("pe_sums").rows().size(), n * o.rounds);
    return r;
}

std::vector<std::pair<std::int64_t, std::int64_t>> window_bench_events(const Database& db) {
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    const auto& counts = db.public_table("win_count").rows();
    const auto& sums = db.public_table("win_sum").rows();
    auto c = counts.begin();
    auto s = sums.begin();
    for (; c != counts.end() && s != sums.end(); ++c, ++s)
        out.emplace_back(std::get<std::int64_t>(c->second.values[0]), std::get<std::int64_t>(s->second.values[0]));
    return out;
}

MetricsReport run_window_bench(std::size_t size, std::size_t slide, EngineMode mode, const BenchOptions& o) {
    MetricsReport r;
    r.bench = "window";
    r.mode = mode == EngineMode::Triggered ? "native" : "emulated";
    r.param("size", std::to_string(size));
    r.param("slide", std::to_string(slide));
    auto wc = load_workload(window_doc(size, slide, mode));
    auto res = drive_chain(wc.catalog, EngineMode::Triggered, o, "win_in", r);
    const std::uint64_t n = o.rounds * o.batch_size;
    const std::uint64_t expected = n < size ? 0 : 1 + (n - size) / slide;
    auto events = window_bench_events(res.partition->db());
    exact(r, "window_events", events.size(), expected);
    bool full = std::all_of(events.begin(), events.end(),
                            [&](const auto& e) { return e.first == static_cast<std::int64_t>(size); });
    r.check("event_sizes", full);
    r.stats["events"] = static_cast<double>(events.size());
    std::int64_t checksum = 0;
    for (const auto& e : events) checksum = checksum * 31 + e.second;
    r.stats["event_checksum"] = static_cast<double>(checksum % 1000000007);
    return r;
}

// ---------------------------------------------------------------------------
// Leaderboard

LeaderboardRun run_leaderboard(const LeaderboardParams& params, const std::vector<Vote>& votes) {
    LeaderboardRun run;
    auto& r = run.report;
    r.bench = "leaderboard";
    r.mode = "triggered";
    r.param("contestants", std::to_string(params.contestants));
    r.param("window", std::to_string(params.window));
    r.param("removal_period", std::to_string(params.removal_period));
    r.param("votes", std::to_string(votes.size()));

    auto cat = leaderboard_catalog(params);
    Partition p(cat, PartitionOptions{});
    auto setup = leaderboard_setup(p, params);
    p.run_until_idle();
    r.check("setup_committed", setup.get().committed);

    auto c0 = p.counters();
    std::vector<double> lat;
    auto t0 = Clock::now();
    for (std::size_t i = 0; i < votes.size(); ++i) {
        auto s = Clock::now();
        auto t = submit_vote(p, votes[i], i + 1);
        p.run_until_idle();
        if (t.get().committed) ++run.accepted;
        else ++run.rejected;
        lat.push_back(micros(Clock::now() - s));
    }
    auto t1 = Clock::now();
    r.counters = p.counters() - c0;
    r.workflows = votes.size();
    r.tes = r.counters.te_committed;
    r.seconds = std::chrono::duration<double>(t1 - t0).count();
    r.workflows_per_sec = r.seconds > 0 ? static_cast<double>(r.workflows) / r.seconds : 0;
    r.tes_per_sec = r.seconds > 0 ? static_cast<double>(r.tes) / r.seconds : 0;
    r.latency_p50_us = percentile(lat, 0.5);
    r.latency_p95_us = percentile(lat, 0.95);
    r.latency_p99_us = percentile(lat, 0.99);

    run.state = leaderboard_state(p.db());
    run.schedule = p.committed_schedule();
    auto rep = validate(run.schedule, p.workflow(), ValidationMode::FixedOrder);
    r.check("schedule_valid", rep.correct(), std::to_string(rep.violations.size()) + " violations");
    r.check("no_nested_interleave", rep.count(ViolationKind::NestedInterleave) == 0);
    exact(r, "valid_votes", static_cast<std::uint64_t>(run.state.valid_votes), run.accepted);
    auto q = call_oltp(p, "lb_leaderboard", {});
    p.run_until_idle();
    auto top = q.get();
    r.check("query_matches_top3", top.committed && top.result.size() == run.state.top3.size());
    r.stats["accepted"] = static_cast<double>(run.accepted);
    r.stats["rejected"] = static_cast<double>(run.rejected);
    r.stats["winner"] = static_cast<double>(run.state.winner);
    r.stats["active_contestants"] = static_cast<double>(run.state.active.size());
    return run;
}

// ---------------------------------------------------------------------------
// Recovery

CrashPoint CrashPoint::parse(std::string_view s) {
    CrashPoint c;
    if (s == "none" || s.empty()) return c;
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : s) {
        if (ch == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    auto number = [&](const std::string& x) -> std::uint64_t {
        try {
            std::size_t used = 0;
            auto v = std::stoull(x, &used);
            if (used == x.size()) return v;
        } catch (const std::exception&) {
        }
        fail(ErrorCode::ConfigError, "bad crash point " + std::string(s));
    };
    if (parts.size() < 2 || parts.size() > 3) fail(ErrorCode::ConfigError, "bad crash point " + std::string(s));
    if (parts[0] == "after-round") c.kind = Kind::AfterRound;
    else if (parts[0] == "mid-flush") c.kind = Kind::MidFlush;
    else if (parts[0] == "mid-snapshot") c.kind = Kind::MidSnapshot;
    else fail(ErrorCode::ConfigError, "bad crash point " + std::string(s));
    c.at = number(parts[1]);
    if (parts.size() == 3) {
        if (c.kind == Kind::AfterRound) fail(ErrorCode::ConfigError, "after-round takes no torn byte count");
        c.torn_bytes = number(parts[2]);
    }
    return c;
}

std::string CrashPoint::to_string() const {
    switch (kind) {
    case Kind::None: return "none";
    case Kind::AfterRound: return "after-round:" + std::to_string(at);
    case Kind::MidFlush: return "mid-flush:" + std::to_string(at) + ":" + std::to_string(torn_bytes);
    case Kind::MidSnapshot: return "mid-snapshot:" + std::to_string(at) + ":" + std::to_string(torn_bytes);
    }
    return "?";
}

namespace {

bool public_multisets_equal(const Catalog& cat, const Database& a, const Database& b) {
    for (const auto& t : cat.tables())
        if (sorted_rows(a, t.name) != sorted_rows(b, t.name)) return false;
    return true;
}

struct ChainFeed {
    std::vector<AtomicBatch> batches;
};

/// Submits rounds [from, to] one at a time, running each to completion and
/// checkpointing every `every` rounds.
void feed_rounds(Partition& p, Ingestor& ing, const std::vector<AtomicBatch>& batches, Round from, Round to,
                 std::uint64_t every, const CrashPoint* crash, std::vector<std::pair<Round, Ticket>>* tickets) {
    for (Round rd = from; rd <= to; ++rd) {
        auto t = ing.submit_batch(batches[rd - 1]);
        if (tickets) tickets->emplace_back(rd, t);
        p.run_until_idle();
        if (every && rd % every == 0) p.checkpoint();
        if (crash && crash->kind == CrashPoint::Kind::AfterRound && rd == crash->at) {
            p.crash();
            return;
        }
    }
}

} // namespace

RecoveryOutcome run_recovery_experiment(const RecoveryExperiment& e) {
    RecoveryOutcome out;
    auto& r = out.report;
    r.bench = "recovery";
    r.mode = std::string(to_string(e.mode));
    r.param("chain", std::to_string(e.n));
    r.param("rounds", std::to_string(e.rounds));
    r.param("crash", e.crash.to_string());
    r.param("group_commit_batch", std::to_string(e.group_commit_batch));
    r.param("checkpoint_every", std::to_string(e.checkpoint_every));
    if (e.mode == RecoveryMode::None) fail(ErrorCode::ConfigError, "recovery experiment needs strong or weak mode");

    auto wc = load_workload(pe_chain_doc(e.n));
    std::shared_ptr<const Catalog> cat = wc.catalog;
    const std::string border = "pe_p1";
    FeedSpec fs;
    fs.tuples = e.rounds * e.batch_size;
    fs.seed = e.seed;
    auto batches = cut_batches(generate_feed(fs, cat->stream_schema("pe_in")), e.batch_size);
    const Round rounds = batches.size();

    // Crash-free reference run, keeping the state after every commit.
    std::vector<Database> golden;
    Schedule golden_schedule;
    {
        Partition g(cat, PartitionOptions{});
        golden.push_back(g.db());
        g.set_commit_observer([&](const TransactionExecution& te, const Database& db) {
            if (golden.size() <= te.commit_seq) golden.resize(te.commit_seq + 1);
            golden[te.commit_seq] = db;
        });
        Ingestor ing(g, "pe_in", BatchingPolicy::fixed(e.batch_size));
        feed_rounds(g, ing, batches, 1, rounds, 0, nullptr, nullptr);
        golden_schedule = g.committed_schedule();
    }

    auto base = [&](const std::filesystem::path& dir) {
        PartitionOptions o;
        o.mode = e.mode;
        o.dir = dir;
        o.group_commit.max_batch = e.group_commit_batch;
        o.group_commit.max_delay = std::chrono::microseconds(0);
        o.sync = e.sync;
        return o;
    };

    // Crash-free logged run, for the log volume.
    {
        auto dir = e.dir / "clean";
        std::filesystem::remove_all(dir);
        Partition c(cat, base(dir));
        Ingestor ing(c, "pe_in", BatchingPolicy::fixed(e.batch_size));
        auto t0 = Clock::now();
        feed_rounds(c, ing, batches, 1, rounds, 0, nullptr, nullptr);
        c.flush_log();
        r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        r.workflows = rounds;
        r.tes = c.counters().te_committed;
        r.workflows_per_sec = r.seconds > 0 ? static_cast<double>(rounds) / r.seconds : 0;
        r.tes_per_sec = r.seconds > 0 ? static_cast<double>(r.tes) / r.seconds : 0;
        out.clean_log_records = c.counters().log_records;
        r.stats["clean_sync_count"] = static_cast<double>(c.counters().sync_count);
        std::filesystem::remove_all(dir);
    }

    // The run that crashes.
    auto dir = e.dir / "crash";
    std::filesystem::remove_all(dir);
    auto opts = base(dir);
    opts.faults = std::make_shared<FaultPlan>();
    if (e.crash.kind == CrashPoint::Kind::MidFlush) {
        opts.faults->crash_on_flush = e.crash.at;
        opts.faults->torn_bytes = e.crash.torn_bytes;
    } else if (e.crash.kind == CrashPoint::Kind::MidSnapshot) {
        opts.faults->crash_on_snapshot = e.crash.at;
        opts.faults->snapshot_torn_bytes = e.crash.torn_bytes;
    }
    std::vector<std::pair<Round, Ticket>> tickets;
    Schedule pre_schedule;
    CounterValues pre_counters;
    {
        Partition p(cat, opts);
        Ingestor ing(p, "pe_in", BatchingPolicy::fixed(e.batch_size));
        try {
            feed_rounds(p, ing, batches, 1, rounds, e.checkpoint_every, &e.crash, &tickets);
            if (!p.crashed()) p.flush_log();
        } catch (const SimulatedCrash&) {
        }
        out.crashed = p.crashed();
        pre_schedule = p.committed_schedule();
        pre_counters = p.counters();
    }

    std::vector<std::pair<Round, CommitSeq>> acked;
    for (const auto& [rd, t] : tickets) {
        if (t.wait_for(std::chrono::seconds(0)) != std::future_status::ready) continue;
        auto o = t.get();
        if (o.committed) acked.emplace_back(rd, o.commit_seq);
    }

    // Opening the log again cuts a torn tail, so measure it first.
    std::uint64_t torn_tail = 0;
    if (std::filesystem::exists(dir / "command.log")) {
        auto image = read_command_log(dir / "command.log");
        torn_tail = image.file_bytes - image.valid_bytes;
    }

    // Recover into a fresh partition and finish the feed.
    auto ropts = base(dir);
    Partition q(cat, ropts);
    out.recovery = recover(q, recovery_paths(dir));
    const auto& rep = out.recovery;

    if (e.mode == RecoveryMode::Strong) {
        out.prefix_equal = rep.replayed_to < golden.size() && q.db() == golden[rep.replayed_to];
        out.durable_acks = std::all_of(acked.begin(), acked.end(),
                                       [&](const auto& a) { return a.second <= rep.replayed_to; });
    } else {
        out.prefix_equal = true;
        auto last = q.db().progress().last_round;
        Round done = last.count(border) ? last.at(border) : 0;
        out.durable_acks = std::all_of(acked.begin(), acked.end(), [&](const auto& a) { return a.first <= done; });
    }
    q.run_until_idle();

    Round next = 1;
    {
        const auto& last = q.db().progress().last_round;
        if (auto it = last.find(border); it != last.end()) next = it->second + 1;
        if (auto* cache = q.input_cache())
            if (auto it = cache->retained().find("pe_in"); it != cache->retained().end() && !it->second.empty())
                next = std::max(next, it->second.rbegin()->first + 1);
    }
    {
        Ingestor ing(q, "pe_in", BatchingPolicy::fixed(e.batch_size), next);
        if (next <= rounds) feed_rounds(q, ing, batches, next, rounds, e.checkpoint_every, nullptr, nullptr);
        q.run_until_idle();
        q.flush_log();
    }

    if (e.mode == RecoveryMode::Strong) out.final_equal = q.db() == golden.back();
    else out.final_equal = public_multisets_equal(*cat, q.db(), golden.back()) && internal_streams_empty(q);

    Schedule history;
    for (const auto& te : pre_schedule.entries)
        if (te.commit_seq <= rep.snapshot_seq) history.entries.push_back(te);
    for (const auto& te : q.committed_schedule().entries) history.entries.push_back(te);
    auto v = validate(history, q.workflow(), ValidationMode::AnyTopological);
    out.schedule_valid = v.correct();

    r.counters = q.counters();
    r.stats["crashed"] = out.crashed;
    r.stats["pre_crash_log_records"] = static_cast<double>(pre_counters.log_records);
    r.stats["pre_crash_sync_count"] = static_cast<double>(pre_counters.sync_count);
    r.stats["clean_log_records"] = static_cast<double>(out.clean_log_records);
    r.stats["snapshot_seq"] = static_cast<double>(rep.snapshot_seq);
    r.stats["replayed"] = static_cast<double>(rep.replayed);
    r.stats["replayed_to"] = static_cast<double>(rep.replayed_to);
    r.stats["truncated_bytes"] = static_cast<double>(std::max<std::uint64_t>(rep.truncated_bytes, torn_tail));
    r.stats["refired"] = static_cast<double>(rep.refired);
    r.stats["reinjected"] = static_cast<double>(rep.reinjected);
    r.stats["client_path_replays"] = static_cast<double>(rep.client_path_replays);
    r.stats["trigger_dispatches"] = static_cast<double>(rep.trigger_dispatches);
    r.stats["recovery_millis"] = rep.millis;
    const std::uint64_t per_round = e.mode == RecoveryMode::Strong ? e.n : 1;
    exact(r, "clean_log_records", out.clean_log_records, per_round * rounds);
    r.check("prefix_equal", out.prefix_equal);
    r.check("final_equal", out.final_equal);
    r.check("schedule_valid", out.schedule_valid, std::to_string(v.violations.size()) + " violations");
    r.check("durable_acks", out.durable_acks);
    return out;
}

// ---------------------------------------------------------------------------
// Partition scaling

ScalingRun run_partition_scaling(std::uint32_t partitions, const ScalingOptions& o) {
    ScalingRun run;
    auto& r = run.report;
    r.bench = "scaling";
    r.mode = std::string(to_string(o.mode));
    r.param("partitions", std::to_string(partitions));
    r.param("stages", std::to_string(o.stages));
    r.param("tuples", std::to_string(o.tuples));
    r.param("batch_size", std::to_string(o.batch_size));

    auto wc = load_workload(scaling_doc(o.stages));
    std::filesystem::remove_all(o.dir);
    PartitionOptions base;
    base.mode = o.mode;
    base.dir = o.mode == RecoveryMode::None ? std::filesystem::path{} : o.dir;
    base.group_commit.max_batch = 1;
    base.group_commit.max_delay = std::chrono::microseconds(0);
    base.sync = o.sync;
    base.queue_bound = 4096;

    FeedSpec fs;
    fs.tuples = o.tuples;
    fs.seed = o.seed;
    fs.max_value = 999;
    auto feed = generate_feed(fs, wc.catalog->stream_schema("sc_in"));
    std::mt19937_64 rng(o.seed);
    std::uniform_int_distribution<std::int64_t> key(0, std::max<std::int64_t>(0, o.keys - 1));
    for (auto& t : feed) t.values[0] = key(rng);

    PartitionedEngine eng(wc.catalog, partitions, "k", base, BatchingPolicy::fixed(o.batch_size));
    eng.start();
    std::vector<Ticket> tickets;
    auto push_range = [&](std::size_t a, std::size_t b) {
        for (std::size_t i = a; i < b; ++i)
            for (auto& t : eng.push("sc_in", feed[i].values, feed[i].meta.ts)) tickets.push_back(std::move(t));
    };
    auto settle = [&] {
        for (std::size_t i = 0; i < eng.size(); ++i) eng.partition(i).wait_idle();
        for (const auto& t : tickets) t.wait();
    };
    const auto warm = static_cast<std::size_t>(o.warmup_fraction * static_cast<double>(feed.size()));
    push_range(0, warm);
    settle();
    CounterValues c0;
    for (std::size_t i = 0; i < eng.size(); ++i) add_counters(c0, eng.partition(i).counters());
    auto t0 = Clock::now();
    push_range(warm, feed.size());
    for (auto& t : eng.end_of_streams()) tickets.push_back(std::move(t));
    settle();
    auto t1 = Clock::now();
    eng.stop();

    CounterValues c1;
    bool valid = true;
    for (std::size_t i = 0; i < eng.size(); ++i) {
        auto& p = eng.partition(i);
        add_counters(c1, p.counters());
        valid = valid && validate(p.committed_schedule(), p.workflow(), ValidationMode::FixedOrder).correct();
        for (const auto& [b, tuples] : p.db().stream_table("sc_out").batches())
            for (const auto& t : tuples) run.outputs.push_back(t.values);
    }
    std::sort(run.outputs.begin(), run.outputs.end());
    std::size_t failed = 0;
    for (const auto& t : tickets)
        if (!t.get().committed) ++failed;

    r.counters = c1 - c0;
    r.counters.max_concurrent_te = c1.max_concurrent_te;
    r.tes = r.counters.te_committed;
    r.workflows = (feed.size() - warm + o.batch_size - 1) / o.batch_size;
    r.seconds = std::chrono::duration<double>(t1 - t0).count();
    r.workflows_per_sec = r.seconds > 0 ? static_cast<double>(r.workflows) / r.seconds : 0;
    r.tes_per_sec = r.seconds > 0 ? static_cast<double>(r.tes) / r.seconds : 0;
    r.stats["tuples_per_sec"] = r.seconds > 0 ? static_cast<double>(feed.size() - warm) / r.seconds : 0;
    r.check("schedule_valid", valid);
    r.check("no_failed_batches", failed == 0, std::to_string(failed));
    exact(r, "outputs", run.outputs.size(), feed.size());
    r.check("serial_per_partition", c1.max_concurrent_te <= 1);
    std::filesystem::remove_all(o.dir);
    return run;
}

// ---------------------------------------------------------------------------
// Config-driven run

MetricsReport run_workload(const WorkloadConfig& wc, Schedule* schedule_out) {
    MetricsReport r;
    r.bench = "run";
    r.mode = std::string(to_string(wc.engine.mode));
    if (wc.engine.mode != EngineMode::Triggered)
        fail(ErrorCode::ConfigError, "run drives triggered workloads; client_driven is a bench mode");
    if (wc.feeds.empty()) fail(ErrorCode::ConfigError, "no [feed] sections");
    r.param("partitions", std::to_string(wc.engine.partitions));
    r.param("recovery", std::string(to_string(wc.engine.recovery)));

    PartitionOptions base = partition_options(wc.engine, 0, wc.engine.dir);
    if (wc.engine.recovery == RecoveryMode::None) base.dir.clear();
    PartitionedEngine eng(wc.catalog, wc.engine.partitions, wc.engine.partition_key, base, BatchingPolicy::fixed(1));

    struct Cursor {
        const FeedSpec* spec;
        std::vector<Tuple> tuples;
        std::size_t next = 0;
    };
    std::vector<Cursor> cursors;
    for (const auto& f : wc.feeds) {
        eng.set_policy(f.stream, f.batch_by_ts ? BatchingPolicy::by_timestamp() : BatchingPolicy::fixed(f.batch_size));
        cursors.push_back({&f, load_feed(f, wc.catalog->stream_schema(f.stream)), 0});
    }

    std::vector<Ticket> tickets;
    std::uint64_t batches = 0;
    auto t0 = Clock::now();
    for (bool more = true; more;) {
        more = false;
        for (auto& c : cursors) {
            if (c.next >= c.tuples.size()) continue;
            more = true;
            const auto& t = c.tuples[c.next++];
            auto got = eng.push(c.spec->stream, t.values, t.meta.ts);
            if (got.empty()) continue;
            eng.run_until_idle();
            for (auto& x : got) tickets.push_back(std::move(x));
            batches += got.size();
            if (wc.engine.checkpoint_every && wc.engine.recovery != RecoveryMode::None &&
                batches % wc.engine.checkpoint_every == 0)
                for (std::size_t i = 0; i < eng.size(); ++i) eng.partition(i).checkpoint();
        }
    }
    for (auto& t : eng.end_of_streams()) tickets.push_back(std::move(t));
    eng.run_until_idle();
    for (std::size_t i = 0; i < eng.size(); ++i) eng.partition(i).flush_log();
    auto t1 = Clock::now();

    std::size_t aborted = 0;
    for (const auto& t : tickets)
        if (!t.get().committed) ++aborted;
    CounterValues total;
    bool valid = true;
    for (std::size_t i = 0; i < eng.size(); ++i) {
        auto& p = eng.partition(i);
        add_counters(total, p.counters());
        auto rep = validate(p.committed_schedule(), p.workflow(), ValidationMode::FixedOrder);
        valid = valid && rep.correct();
        if (schedule_out && i == 0) *schedule_out = p.committed_schedule();
    }
    r.counters = total;
    r.workflows = tickets.size();
    r.tes = total.te_committed;
    r.seconds = std::chrono::duration<double>(t1 - t0).count();
    r.workflows_per_sec = r.seconds > 0 ? static_cast<double>(r.workflows) / r.seconds : 0;
    r.tes_per_sec = r.seconds > 0 ? static_cast<double>(r.tes) / r.seconds : 0;
    r.stats["aborted_batches"] = static_cast<double>(aborted);
    r.check("schedule_valid", valid);
    r.check("serial_execution", total.max_concurrent_te <= 1);
    return r;
}

} // namespace streamtx
