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

#include <doctest.h>

#include <random>

#include "../oracles/leaderboard_sim.hpp"
#include "../oracles/window_oracle.hpp"
#include "helpers.hpp"
#include "streamtx/bench.hpp"
#include "streamtx/partitioned.hpp"
#include "streamtx/validator.hpp"

using namespace streamtx;
using testutil::code_of;

namespace {

BenchOptions small(std::uint64_t rounds = 60) {
    BenchOptions o;
    o.rounds = rounds;
    o.batch_size = 4;
    o.threaded = false;
    return o;
}

std::string failed_checks(const MetricsReport& r) {
    std::string out;
    for (const auto& c : r.checks)
        if (!c.passed) out += c.name + " (" + c.detail + ") ";
    return out;
}

std::filesystem::path votes_csv() { return std::filesystem::path(STREAMTX_TEST_DATA) / "leaderboard_votes.csv"; }

std::vector<BoardRow> rows(const std::vector<oracle::SimRow>& xs) {
    std::vector<BoardRow> out;
    for (const auto& x : xs) out.push_back({x.rank, x.contestant, x.votes});
    return out;
}

} // namespace

TEST_CASE("EE bench counters per mode") {
    for (std::size_t k : {1u, 3u, 10u}) {
        auto t = run_ee_trigger_bench(k, EngineMode::Triggered, small());
        auto c = run_ee_trigger_bench(k, EngineMode::ClientDriven, small());
        INFO("k=", k, " ", failed_checks(t), failed_checks(c));
        CHECK(t.passed());
        CHECK(c.passed());
        CHECK(t.stats["dispatches_per_batch"] == 1.0);
        CHECK(c.stats["dispatches_per_batch"] == static_cast<double>(k));
        CHECK(t.stats["state_digest"] == c.stats["state_digest"]);
    }
}

TEST_CASE("PE bench counters per mode") {
    for (std::size_t n : {1u, 2u, 5u}) {
        auto t = run_pe_trigger_bench(n, EngineMode::Triggered, small());
        auto c = run_pe_trigger_bench(n, EngineMode::ClientDriven, small());
        INFO("n=", n, " ", failed_checks(t), failed_checks(c));
        CHECK(t.passed());
        CHECK(c.passed());
        CHECK(t.stats["roundtrips_per_workflow"] == 1.0);
        CHECK(c.stats["roundtrips_per_workflow"] == static_cast<double>(n));
        CHECK(t.stats["state_digest"] == c.stats["state_digest"]);
        CHECK(t.workflows == c.workflows);
    }
}

TEST_CASE("threaded PE bench still meets its identities") {
    auto o = small(200);
    o.threaded = true;
    auto t = run_pe_trigger_bench(3, EngineMode::Triggered, o);
    auto c = run_pe_trigger_bench(3, EngineMode::ClientDriven, o);
    CHECK(t.passed());
    CHECK(c.passed());
    CHECK(t.workflows_per_sec > 0);
}

TEST_CASE("window bench: native and emulated emit the oracle's events") {
    for (auto [size, slide] : {std::pair<std::size_t, std::size_t>{4, 1}, {5, 2}, {3, 3}, {8, 5}}) {
        auto o = small(40);
        auto n = run_window_bench(size, slide, EngineMode::Triggered, o);
        auto e = run_window_bench(size, slide, EngineMode::ClientDriven, o);
        INFO(size, "/", slide, " ", failed_checks(n), failed_checks(e));
        CHECK(n.passed());
        CHECK(e.passed());
        CHECK(n.stats["events"] == e.stats["events"]);
        CHECK(n.stats["event_checksum"] == e.stats["event_checksum"]);
        const auto total = o.rounds * o.batch_size;
        CHECK(n.stats["events"] == static_cast<double>(total >= size ? (total - size) / slide + 1 : 0));
    }
}

TEST_CASE("leaderboard run matches the sequential simulator") {
    auto votes = read_votes(votes_csv());
    REQUIRE(votes.size() == 40);
    LeaderboardParams params{4, 4, 6};
    auto run = run_leaderboard(params, votes);
    INFO(failed_checks(run.report));
    CHECK(run.report.passed());

    oracle::LeaderboardSim sim(4, 4, 6);
    std::size_t accepted = 0;
    for (const auto& v : votes) accepted += sim.vote(v.phone, v.contestant);
    CHECK(run.accepted == accepted);
    CHECK(run.rejected == votes.size() - accepted);
    CHECK(run.state.valid_votes == sim.valid());
    CHECK(run.state.active == sim.running());
    CHECK(run.state.counts == sim.tally());
    CHECK(run.state.top3 == rows(sim.top()));
    CHECK(run.state.bottom3 == rows(sim.bottom()));
    CHECK(run.state.trending3 == rows(sim.trend()));
    CHECK(run.state.winner == sim.winner());
    CHECK(run.state.winner == 3);

    auto rep = validate(run.schedule, leaderboard_catalog(params)->workflow(), ValidationMode::FixedOrder);
    CHECK(rep.correct());
    CHECK(rep.count(ViolationKind::NestedInterleave) == 0);
}

TEST_CASE("property: leaderboard matches the simulator on random traces") {
    std::mt19937_64 rng(4242);
    for (int iter = 0; iter < 15; ++iter) {
        LeaderboardParams params{static_cast<std::int64_t>(2 + rng() % 4), 1 + rng() % 5,
                                 static_cast<std::uint64_t>(2 + rng() % 6)};
        std::vector<Vote> votes;
        for (int i = 0, n = 10 + static_cast<int>(rng() % 40); i < n; ++i)
            votes.push_back({static_cast<std::int64_t>(rng() % 30), static_cast<std::int64_t>(rng() % 7)});
        auto run = run_leaderboard(params, votes);
        oracle::LeaderboardSim sim(params.contestants, params.window, static_cast<std::int64_t>(params.removal_period));
        for (const auto& v : votes) sim.vote(v.phone, v.contestant);
        INFO("iter ", iter);
        CHECK(run.report.passed());
        CHECK(run.state.counts == sim.tally());
        CHECK(run.state.top3 == rows(sim.top()));
        CHECK(run.state.bottom3 == rows(sim.bottom()));
        CHECK(run.state.trending3 == rows(sim.trend()));
        CHECK(run.state.winner == sim.winner());
    }
}

TEST_CASE("a duplicate phone vote is rejected and changes no count") {
    LeaderboardParams params{3, 2, 100};
    auto once = run_leaderboard(params, {{7, 1}, {8, 2}});
    auto twice = run_leaderboard(params, {{7, 1}, {8, 2}, {7, 2}});
    CHECK(twice.rejected == 1);
    CHECK(twice.accepted == 2);
    CHECK(twice.state.counts == once.state.counts);
    CHECK(twice.state.valid_votes == 2);
}

TEST_CASE("partitioned engine") {
    auto cat = load_workload(scaling_doc(2)).catalog;
    PartitionOptions base;
    base.sync = false;

    SUBCASE("tables make a workload unpartitionable") {
        auto lb = leaderboard_catalog({4, 4, 6});
        CHECK(code_of([&] { PartitionedEngine(lb, 2, "phone", base, BatchingPolicy::fixed(1)); }) ==
              ErrorCode::NotPartitionable);
    }
    SUBCASE("unknown key column") {
        CHECK(code_of([&] { PartitionedEngine(cat, 2, "nope", base, BatchingPolicy::fixed(1)); }) ==
              ErrorCode::UnknownColumn);
    }
    SUBCASE("routing is stable") {
        PartitionedEngine e(cat, 4, "k", base, BatchingPolicy::fixed(1));
        for (std::int64_t k = 0; k < 50; ++k) CHECK(e.route(Value{k}) == key_hash(Value{k}) % 4);
        CHECK(key_hash(Value{std::int64_t{12}}) == key_hash(Value{std::int64_t{12}}));
    }
}

TEST_CASE("partition scaling: unions equal the single-partition run") {
    testutil::TempDir d("scale");
    ScalingOptions o;
    o.tuples = 600;
    o.keys = 64;
    o.mode = RecoveryMode::None;
    o.dir = d.path();
    o.sync = false;
    auto one = run_partition_scaling(1, o);
    CHECK(one.report.passed());
    CHECK(one.outputs.size() == 600);
    for (std::uint32_t p : {2u, 4u}) {
        auto many = run_partition_scaling(p, o);
        INFO("p=", p, " ", failed_checks(many.report));
        CHECK(many.report.passed());
        CHECK(many.outputs == one.outputs);
    }
}

TEST_CASE("workload runner over a config document") {
    auto doc = pe_chain_doc(3);
    auto& f = doc.add("feed", "main");
    f.set("stream", "pe_in");
    f.set("tuples", 90);
    f.set("batch_size", 3);
    f.set("seed", 5);
    auto wc = load_workload(doc);
    Schedule s;
    auto r = run_workload(wc, &s);
    INFO(failed_checks(r));
    CHECK(r.passed());
    CHECK(s.entries.size() == 90);
    CHECK(r.counters.client_roundtrips == 30);

    wc.engine.mode = EngineMode::ClientDriven;
    CHECK(code_of([&] { run_workload(wc); }) == ErrorCode::ConfigError);
}

TEST_CASE("metrics report serialisation") {
    auto r = run_pe_trigger_bench(2, EngineMode::Triggered, small(20));
    auto json = reports_to_json({r});
    CHECK(json.find("\"bench\"") != std::string::npos);
    CHECK(json.find("\"checks\"") != std::string::npos);
    auto csv = reports_to_csv({r});
    CHECK(csv.rfind("bench,mode,key,value", 0) == 0);
    CHECK(csv.find("pe,triggered,workflows_per_sec,") != std::string::npos);
    CHECK(percentile({3, 1, 2, 4}, 0.5) == 2);
    CHECK(percentile({}, 0.5) == 0);
}
