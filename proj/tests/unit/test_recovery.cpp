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

#include <fstream>
#include <random>

#include "helpers.hpp"
#include "streamtx/bench.hpp"
#include "streamtx/ingest.hpp"
#include "streamtx/recovery.hpp"
#include "streamtx/validator.hpp"

using namespace streamtx;
using testutil::code_of;
using testutil::TempDir;

namespace {

std::shared_ptr<Catalog> chain(std::size_t n) { return load_workload(pe_chain_doc(n)).catalog; }

PartitionOptions opts(const std::filesystem::path& dir, RecoveryMode mode, std::size_t max_batch = 1) {
    PartitionOptions o;
    o.dir = dir;
    o.mode = mode;
    o.sync = false;
    o.group_commit.max_batch = max_batch;
    o.group_commit.max_delay = std::chrono::seconds(60);
    return o;
}

/// Deterministic feed: round r carries values r*10 .. r*10+k-1.
std::vector<Ticket> feed(Partition& p, Ingestor& in, Round from, Round to, std::size_t per_batch = 2) {
    (void)p;
    std::vector<Ticket> out;
    for (Round r = from; r <= to; ++r)
        for (std::size_t i = 0; i < per_batch; ++i) {
            auto ts = in.push({Value{static_cast<std::int64_t>(r * 10 + i)}});
            out.insert(out.end(), ts.begin(), ts.end());
        }
    return out;
}

std::unique_ptr<Partition> golden(std::shared_ptr<Catalog> cat, Round rounds) {
    auto g = std::make_unique<Partition>(cat);
    Ingestor in(*g, "pe_in", BatchingPolicy::fixed(2));
    feed(*g, in, 1, rounds);
    g->run_until_idle();
    return g;
}

std::size_t records_in(const std::filesystem::path& log) { return read_command_log(log).records.size(); }

} // namespace

TEST_CASE("log volume: strong logs every TE, weak logs only borders") {
    for (std::size_t n : {1u, 4u}) {
        TempDir ds("strong"), dw("weak");
        auto cat = chain(n);
        {
            Partition s(cat, opts(ds.path(), RecoveryMode::Strong));
            Ingestor in(s, "pe_in", BatchingPolicy::fixed(2));
            feed(s, in, 1, 100);
            s.run_until_idle();
            s.flush_log();
            CHECK(s.counters().log_records == 100 * n);
        }
        {
            Partition w(cat, opts(dw.path(), RecoveryMode::Weak));
            Ingestor in(w, "pe_in", BatchingPolicy::fixed(2));
            feed(w, in, 1, 100);
            w.run_until_idle();
            w.flush_log();
            CHECK(w.counters().log_records == 100);
            CHECK(w.counters().input_cache_appends == 100);
        }
        CHECK(records_in(ds.path() / "command.log") == 100 * n);
        CHECK(records_in(dw.path() / "command.log") == 100);
    }
}

TEST_CASE("log record contents by mode") {
    const std::string text = std::string(testutil::kTwoChain) + R"cfg(
[procedure q]
kind = "oltp"
tables = ["log"]
body = ["insert_args log"]
)cfg";
    auto cat = testutil::catalog_from(text);
    SUBCASE("weak logs OLTP and borders") {
        TempDir d("weak-oltp");
        {
            Partition p(cat, opts(d.path(), RecoveryMode::Weak));
            Ingestor in(p, "in", BatchingPolicy::fixed(1));
            in.push({Value{std::int64_t{3}}});
            call_oltp(p, "q", {Value{std::int64_t{8}}});
            p.run_until_idle();
        }
        auto log = read_command_log(d.path() / "command.log");
        CHECK(log.header.mode == RecoveryMode::Weak);
        REQUIRE(log.records.size() == 2);
        CHECK(log.records[0].procedure == "sp1");
        CHECK(log.records[1].procedure == "q");
        CHECK(log.records[0].commit_seq < log.records[1].commit_seq);
    }
    SUBCASE("strong logs interiors with their round and no args") {
        TempDir d("strong-int");
        {
            Partition p(cat, opts(d.path(), RecoveryMode::Strong));
            Ingestor in(p, "in", BatchingPolicy::fixed(1));
            in.push({Value{std::int64_t{3}}});
            in.push({Value{std::int64_t{4}}});
            p.run_until_idle();
        }
        auto log = read_command_log(d.path() / "command.log");
        REQUIRE(log.records.size() == 4);
        CHECK(log.records[1].procedure == "sp2");
        CHECK(log.records[1].round == 1);
        CHECK(log.records[1].args.empty());
        CHECK(log.records[3].round == 2);
        for (std::size_t i = 1; i < log.records.size(); ++i)
            CHECK(log.records[i].commit_seq > log.records[i - 1].commit_seq);
    }
}

TEST_CASE("group commit: acks wait for the flush and syncs stay bounded") {
    TempDir d("gc");
    const std::size_t max_batch = 4;
    Partition p(chain(2), opts(d.path(), RecoveryMode::Strong, max_batch));
    Ingestor in(p, "pe_in", BatchingPolicy::fixed(2));
    auto tickets = feed(p, in, 1, 37);
    REQUIRE(p.step());
    CHECK(tickets[0].wait_for(std::chrono::seconds(0)) == std::future_status::timeout);
    p.run_until_idle();
    p.flush_log();
    for (auto& t : tickets) CHECK(t.get().committed);
    auto c = p.counters();
    const std::uint64_t acked = c.te_committed;
    CHECK(acked == 74);
    CHECK(c.sync_count <= (acked + max_batch - 1) / max_batch + c.timer_flushes);
}

TEST_CASE("strong recovery after round 3 is bit-equal to a crash-free run") {
    TempDir d("strong3");
    auto cat = chain(3);
    {
        Partition p(cat, opts(d.path(), RecoveryMode::Strong));
        Ingestor in(p, "pe_in", BatchingPolicy::fixed(2));
        feed(p, in, 1, 3);
        p.run_until_idle();
        p.crash();
    }
    Partition r(cat, opts(d.path(), RecoveryMode::Strong));
    auto rep = recover(r, recovery_paths(d.path()));
    r.run_until_idle();
    CHECK(rep.replayed == 9);
    CHECK(rep.client_path_replays == 9);
    CHECK(rep.trigger_dispatches == 0);
    auto g = golden(cat, 3);
    CHECK(r.db() == g->db());
    CHECK(r.last_commit_seq() == 9);
}

TEST_CASE("crash between group-commit flushes keeps exactly the acknowledged TEs") {
    TempDir d("between");
    auto cat = chain(2);
    std::map<CommitSeq, Database> states;
    {
        Partition g(cat);
        g.set_commit_observer([&](const TransactionExecution& te, const Database& db) { states[te.commit_seq] = db; });
        Ingestor in(g, "pe_in", BatchingPolicy::fixed(2));
        feed(g, in, 1, 7);
        g.run_until_idle();
    }
    std::vector<Ticket> tickets;
    {
        Partition p(cat, opts(d.path(), RecoveryMode::Strong, 3));
        Ingestor in(p, "pe_in", BatchingPolicy::fixed(2));
        tickets = feed(p, in, 1, 7);
        while (p.step()) {
        }
        p.crash();
    }
    Partition r(cat, opts(d.path(), RecoveryMode::Strong));
    recover(r, recovery_paths(d.path()));
    CommitSeq durable = r.last_commit_seq();
    CHECK(durable == 12);
    for (auto& t : tickets) {
        auto o = t.get();
        if (o.committed) CHECK(o.commit_seq <= durable);
    }
    CHECK(r.db() == states.at(durable));
}

TEST_CASE("empty log and no snapshot recover to an empty engine") {
    TempDir d("empty");
    auto cat = chain(2);
    {
        Partition p(cat, opts(d.path(), RecoveryMode::Strong));
        p.crash();
    }
    Partition r(cat, opts(d.path(), RecoveryMode::Strong));
    auto rep = recover(r, recovery_paths(d.path()));
    CHECK(rep.replayed == 0);
    CHECK_FALSE(rep.snapshot.has_value());
    CHECK(r.db() == cat->build_database());
}

TEST_CASE("checkpoints") {
    auto cat = chain(2);
    SUBCASE("checkpoint then crash with an empty tail restores only") {
        TempDir d("ckpt");
        std::filesystem::path snap;
        {
            Partition p(cat, opts(d.path(), RecoveryMode::Strong));
            Ingestor in(p, "pe_in", BatchingPolicy::fixed(2));
            feed(p, in, 1, 4);
            p.run_until_idle();
            snap = p.checkpoint();
            p.crash();
        }
        Partition r(cat, opts(d.path(), RecoveryMode::Strong));
        auto rep = recover(r, recovery_paths(d.path()));
        CHECK(rep.snapshot == snap);
        CHECK(rep.snapshot_seq == 8);
        CHECK(rep.replayed == 0);
        CHECK(r.db() == golden(cat, 4)->db());
    }
    SUBCASE("the latest of two checkpoints is used") {
        TempDir d("ckpt2");
        std::filesystem::path second;
        {
            Partition p(cat, opts(d.path(), RecoveryMode::Strong));
            Ingestor in(p, "pe_in", BatchingPolicy::fixed(2));
            feed(p, in, 1, 2);
            p.run_until_idle();
            p.checkpoint();
            feed(p, in, 3, 5);
            p.run_until_idle();
            second = p.checkpoint();
            feed(p, in, 6, 6);
            p.run_until_idle();
            p.crash();
        }
        Partition r(cat, opts(d.path(), RecoveryMode::Strong));
        auto rep = recover(r, recovery_paths(d.path()));
        CHECK(rep.snapshot == second);
        CHECK(rep.replayed == 2);
        CHECK(r.db() == golden(cat, 6)->db());
    }
    SUBCASE("a torn snapshot falls back to the previous one") {
        TempDir d("torn-snap");
        std::filesystem::path first;
        {
            auto o = opts(d.path(), RecoveryMode::Strong);
            o.faults = std::make_shared<FaultPlan>();
            o.faults->crash_on_snapshot = 2;
            o.faults->snapshot_torn_bytes = 20;
            Partition p(cat, o);
            Ingestor in(p, "pe_in", BatchingPolicy::fixed(2));
            feed(p, in, 1, 2);
            p.run_until_idle();
            first = p.checkpoint();
            feed(p, in, 3, 4);
            p.run_until_idle();
            CHECK_THROWS_AS(p.checkpoint(), SimulatedCrash);
        }
        CHECK(latest_valid_snapshot(d.path()) == first);
        Partition r(cat, opts(d.path(), RecoveryMode::Strong));
        auto rep = recover(r, recovery_paths(d.path()));
        CHECK(rep.snapshot == first);
        CHECK(r.db() == golden(cat, 4)->db());
    }
}

TEST_CASE("a torn log tail is truncated at the first bad record") {
    TempDir d("torn-log");
    auto cat = chain(2);
    {
        Partition p(cat, opts(d.path(), RecoveryMode::Strong));
        Ingestor in(p, "pe_in", BatchingPolicy::fixed(2));
        feed(p, in, 1, 3);
        p.run_until_idle();
        p.crash();
    }
    const auto log = d.path() / "command.log";
    {
        std::ofstream f(log, std::ios::binary | std::ios::app);
        const char junk[] = {0x30, 0, 0, 0, 1, 2, 3};
        f.write(junk, sizeof junk);
    }
    auto contents = read_command_log(log);
    CHECK(contents.truncated());
    CHECK(contents.records.size() == 6);
    Partition r(cat, opts(d.path(), RecoveryMode::None));
    auto rep = recover_strong(r, recovery_paths(d.path()));
    CHECK(rep.truncated_bytes == sizeof(char) * 7);
    CHECK(r.db() == golden(cat, 3)->db());

    // Flipping a payload byte breaks the CRC of the last record.
    auto image = read_file(log);
    image[image.size() - 12] ^= 0xff;
    {
        std::ofstream f(log, std::ios::binary | std::ios::trunc);
        f.write(reinterpret_cast<const char*>(image.data()), static_cast<std::streamsize>(image.size()));
    }
    CHECK(read_command_log(log).records.size() == 5);
}

TEST_CASE("recovering with the wrong mode is refused") {
    TempDir d("mode");
    auto cat = chain(2);
    {
        Partition p(cat, opts(d.path(), RecoveryMode::Strong));
        p.crash();
    }
    Partition r(cat);
    CHECK(code_of([&] { recover_weak(r, recovery_paths(d.path())); }) == ErrorCode::VersionMismatch);
}

TEST_CASE("weak recovery after round 3") {
    TempDir d("weak3");
    auto cat = chain(3);
    Schedule before;
    {
        Partition p(cat, opts(d.path(), RecoveryMode::Weak));
        Ingestor in(p, "pe_in", BatchingPolicy::fixed(2));
        feed(p, in, 1, 3);
        p.run_until_idle();
        before = p.committed_schedule();
        p.crash();
    }
    Partition r(cat, opts(d.path(), RecoveryMode::Weak));
    auto rep = recover(r, recovery_paths(d.path()));
    CHECK(rep.replayed == 3);
    CHECK(rep.client_path_replays == 3);
    CHECK(rep.trigger_dispatches == 6);
    CHECK(validate(r.committed_schedule(), r.workflow(), ValidationMode::AnyTopological).correct());
    auto g = golden(cat, 3);
    CHECK(sorted_rows(r.db(), "pe_sums") == sorted_rows(g->db(), "pe_sums"));
    CHECK(sorted_rows(r.db(), "pe_out") == sorted_rows(g->db(), "pe_out"));
}

TEST_CASE("weak recovery refires an interior batch captured by the snapshot exactly once") {
    TempDir d("weak-refire");
    auto cat = chain(2);
    {
        Partition p(cat, opts(d.path(), RecoveryMode::Weak));
        Ingestor in(p, "pe_in", BatchingPolicy::fixed(2));
        feed(p, in, 1, 5);
        p.run_until_idle();
        p.set_pe_triggers_enabled(false);
        feed(p, in, 6, 6);
        p.run_until_idle();
        CHECK_FALSE(p.db().stream_empty("pe_s1"));
        p.checkpoint();
        // Round 6's interior is pending, so the cache keeps its batch.
        REQUIRE(p.input_cache());
        CHECK(p.input_cache()->low_water() == 5);
        CHECK(p.input_cache()->size() == 1);
        p.crash();
    }
    Partition r(cat, opts(d.path(), RecoveryMode::Weak));
    auto rep = recover(r, recovery_paths(d.path()));
    CHECK(rep.refired == 1);
    CHECK(rep.replayed == 0);
    CHECK(rep.reinjected == 0);
    std::size_t p2_round6 = 0;
    for (const auto& e : r.committed_schedule().entries) p2_round6 += e.procedure == "pe_p2" && e.round == 6;
    CHECK(p2_round6 == 1);
    CHECK(sorted_rows(r.db(), "pe_sums") == sorted_rows(golden(cat, 6)->db(), "pe_sums"));
}

TEST_CASE("single-procedure workflow: weak and strong log the same records") {
    TempDir ds("s1"), dw("w1");
    auto cat = chain(1);
    for (auto [dir, mode] : {std::pair{ds.path(), RecoveryMode::Strong}, std::pair{dw.path(), RecoveryMode::Weak}}) {
        Partition p(cat, opts(dir, mode));
        Ingestor in(p, "pe_in", BatchingPolicy::fixed(2));
        feed(p, in, 1, 10);
        p.run_until_idle();
    }
    auto s = read_command_log(ds.path() / "command.log");
    auto w = read_command_log(dw.path() / "command.log");
    CHECK(s.records == w.records);
    CHECK(s.valid_bytes == w.valid_bytes);
}

TEST_CASE("input cache trimming") {
    TempDir d("cache");
    Counters c;
    InputCache cache(d.path() / "input.cache", 0, false, c);
    for (BatchId b = 1; b <= 6; ++b) cache.append("x", testutil::batch(b, {{Value{std::int64_t(b)}}}));
    CHECK(cache.trim(5) == 5);
    CHECK(cache.trim(5) == 0);
    CHECK(cache.trim(3) == 0);
    CHECK(cache.size() == 1);
    cache.rewrite();
    auto loaded = InputCache::load(d.path() / "input.cache");
    REQUIRE(loaded["x"].size() == 1);
    CHECK(loaded["x"].begin()->first == 6);
}

TEST_CASE("recovery dispatch accounting") {
    auto four = chain(4);
    auto p = recovery_dispatch_count(RecoveryMode::Strong, four->workflow(), 100);
    CHECK(p.client_path == 400);
    CHECK(p.trigger == 0);
    auto w = recovery_dispatch_count(RecoveryMode::Weak, four->workflow(), 100);
    CHECK(w.client_path == 100);
    CHECK(w.trigger == 300);
    auto one = chain(1);
    CHECK(recovery_dispatch_count(RecoveryMode::Strong, one->workflow(), 7).client_path ==
          recovery_dispatch_count(RecoveryMode::Weak, one->workflow(), 7).client_path);

    for (auto mode : {RecoveryMode::Strong, RecoveryMode::Weak}) {
        TempDir d("dispatch");
        {
            Partition x(four, opts(d.path(), mode));
            Ingestor in(x, "pe_in", BatchingPolicy::fixed(2));
            feed(x, in, 1, 10);
            x.run_until_idle();
            x.crash();
        }
        Partition r(four, opts(d.path(), mode));
        auto rep = recover(r, recovery_paths(d.path()));
        r.run_until_idle();
        auto pred = recovery_dispatch_count(mode, four->workflow(), 10);
        CHECK(rep.client_path_replays == pred.client_path);
        CHECK(rep.trigger_dispatches == pred.trigger);
    }
}

TEST_CASE("recovery experiment harness reports exactly-once results") {
    TempDir d("exp");
    RecoveryExperiment e;
    e.n = 3;
    e.rounds = 12;
    e.dir = d.path();
    e.sync = false;
    for (auto mode : {RecoveryMode::Strong, RecoveryMode::Weak}) {
        e.mode = mode;
        for (auto cp : {"after-round:5", "mid-flush:7:9", "none"}) {
            e.crash = CrashPoint::parse(cp);
            auto out = run_recovery_experiment(e);
            INFO(to_string(mode), " ", cp);
            CHECK(out.report.passed());
            CHECK(out.prefix_equal);
            CHECK(out.final_equal);
            CHECK(out.schedule_valid);
            CHECK(out.durable_acks);
            CHECK(out.clean_log_records == (mode == RecoveryMode::Strong ? 3u : 1u) * 12);
        }
    }
    e.mode = RecoveryMode::Strong;
    e.checkpoint_every = 4;
    e.crash = CrashPoint::parse("mid-snapshot:2:15");
    auto out = run_recovery_experiment(e);
    CHECK(out.crashed);
    CHECK(out.prefix_equal);
    CHECK(out.final_equal);
}
