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

#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "streamtx/validator.hpp"

using namespace streamtx;
using testutil::catalog_from;
using testutil::code_of;
using testutil::entries_of;
using testutil::graph_of;

namespace {

Schedule sched(const std::vector<std::pair<std::string, Round>>& es) {
    Schedule s;
    CommitSeq seq = 1;
    for (const auto& [p, r] : es) s.entries.push_back({p, r, {}, seq++});
    return s;
}

const char* kDiamond = R"cfg(
[stream in]
schema = ["v:int"]
[stream ab]
schema = ["v:int"]
[stream ac]
schema = ["v:int"]
[stream bd]
schema = ["v:int"]
[stream cd]
schema = ["v:int"]
[procedure a]
kind = "border"
inputs = ["in"]
outputs = ["ab", "ac"]
[procedure b]
kind = "interior"
inputs = ["ab"]
outputs = ["bd"]
[procedure c]
kind = "interior"
inputs = ["ac"]
outputs = ["cd"]
[procedure d]
kind = "interior"
inputs = ["bd", "cd"]
)cfg";

const char* kFork = R"cfg(
[stream in]
schema = ["v:int"]
[stream ab]
schema = ["v:int"]
[stream ac]
schema = ["v:int"]
[procedure A]
kind = "border"
inputs = ["in"]
outputs = ["ab", "ac"]
[procedure B]
kind = "interior"
inputs = ["ab"]
[procedure C]
kind = "interior"
inputs = ["ac"]
[group g]
children = ["A", "B", "C"]
order = ["A<B", "A<C"]
[procedure q]
kind = "oltp"
)cfg";

} // namespace

TEST_CASE("two-procedure chain over two rounds has exactly two correct schedules") {
    auto cat = catalog_from(testutil::kTwoChain);
    const auto& w = cat->workflow();
    auto all = enumerate_correct_schedules(w, 2, 100);
    REQUIRE(all.size() == 2);
    CHECK(entries_of(all[0]) == std::vector<oracle::Entry>{{"sp1", 1}, {"sp2", 1}, {"sp1", 2}, {"sp2", 2}});
    CHECK(entries_of(all[1]) == std::vector<oracle::Entry>{{"sp1", 1}, {"sp1", 2}, {"sp2", 1}, {"sp2", 2}});

    std::vector<std::pair<std::string, Round>> tes{{"sp1", 1}, {"sp1", 2}, {"sp2", 1}, {"sp2", 2}};
    int accepted = 0, total = 0;
    do {
        ++total;
        bool ok = validate(sched(tes), w, ValidationMode::FixedOrder).correct();
        CHECK(ok == validate(sched(tes), w, ValidationMode::AnyTopological).correct());
        accepted += ok;
    } while (std::next_permutation(tes.begin(), tes.end()));
    CHECK(total == 24);
    CHECK(accepted == 2);
}

TEST_CASE("violations name their kind") {
    auto cat = catalog_from(testutil::kTwoChain);
    const auto& w = cat->workflow();
    auto rep = validate(sched({{"sp2", 1}, {"sp1", 1}}), w, ValidationMode::FixedOrder);
    CHECK(rep.count(ViolationKind::WorkflowOrder) == 1);
    rep = validate(sched({{"sp1", 2}, {"sp1", 1}, {"sp2", 1}, {"sp2", 2}}), w, ValidationMode::FixedOrder);
    CHECK(rep.count(ViolationKind::StreamOrder) >= 1);
    CHECK_FALSE(rep.correct());
}

TEST_CASE("empty schedule is correct") {
    auto cat = catalog_from(testutil::kTwoChain);
    CHECK(validate(Schedule{}, cat->workflow(), ValidationMode::FixedOrder).correct());
}

TEST_CASE("unknown names throw") {
    auto cat = catalog_from(testutil::kTwoChain);
    CHECK(code_of([&] { validate(sched({{"zzz", 1}}), cat->workflow(), ValidationMode::FixedOrder); }) ==
          ErrorCode::UnknownProcedureInSchedule);
}

TEST_CASE("an OLTP TE may sit in any gap") {
    auto cat = catalog_from(std::string(testutil::kTwoChain) + R"cfg(
[procedure q]
kind = "oltp"
)cfg");
    const auto& w = cat->workflow();
    std::vector<std::pair<std::string, Round>> base{{"sp1", 1}, {"sp2", 1}, {"sp1", 2}, {"sp2", 2}};
    for (std::size_t gap = 0; gap <= base.size(); ++gap) {
        auto s = base;
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(gap), {"q", 0});
        CHECK(validate(sched(s), w, ValidationMode::FixedOrder).correct());
    }
}

TEST_CASE("enumeration counts") {
    SUBCASE("one procedure, three rounds") {
        auto cat = catalog_from(R"cfg(
[stream in]
schema = ["v:int"]
[procedure p]
kind = "border"
inputs = ["in"]
)cfg");
        CHECK(enumerate_correct_schedules(cat->workflow(), 3, 100).size() == 1);
    }
    SUBCASE("diamond, one round, equals the number of topological orderings") {
        auto cat = catalog_from(kDiamond);
        const auto& w = cat->workflow();
        auto n = topological_orderings(w, 100).size();
        CHECK(n == 2);
        CHECK(enumerate_correct_schedules(w, 1, 100, ValidationMode::AnyTopological).size() == n);
        CHECK(enumerate_correct_schedules(w, 1, 100, ValidationMode::FixedOrder).size() == 1);
    }
    SUBCASE("too large") {
        auto cat = catalog_from(kDiamond);
        CHECK(code_of([&] { enumerate_correct_schedules(cat->workflow(), 4, 10); }) == ErrorCode::TooLarge);
    }
}

TEST_CASE("nested partial order: A before B and C") {
    auto cat = catalog_from(kFork);
    const auto& w = cat->workflow();
    CHECK(validate(sched({{"A", 1}, {"B", 1}, {"C", 1}}), w, ValidationMode::AnyTopological).correct());
    CHECK(validate(sched({{"A", 1}, {"C", 1}, {"B", 1}}), w, ValidationMode::AnyTopological).correct());
    auto rep = validate(sched({{"B", 1}, {"A", 1}, {"C", 1}}), w, ValidationMode::AnyTopological);
    CHECK_FALSE(rep.correct());
    CHECK(rep.count(ViolationKind::NestedPartialOrder) + rep.count(ViolationKind::WorkflowOrder) >= 1);
    auto split = validate(sched({{"A", 1}, {"B", 1}, {"q", 0}, {"C", 1}}), w, ValidationMode::AnyTopological);
    CHECK(split.count(ViolationKind::NestedInterleave) == 1);
    auto all = enumerate_correct_schedules(w, 1, 100);
    CHECK(all.size() == 2);
}

TEST_CASE("property: fixed-order acceptance is a subset of any-order acceptance") {
    auto cat = catalog_from(kDiamond);
    const auto& w = cat->workflow();
    std::vector<std::pair<std::string, Round>> tes;
    for (Round r = 1; r <= 2; ++r)
        for (const char* p : {"a", "b", "c", "d"}) tes.emplace_back(p, r);
    std::sort(tes.begin(), tes.end());
    std::size_t fixed = 0, any = 0;
    do {
        bool f = validate(sched(tes), w, ValidationMode::FixedOrder).correct();
        bool a = validate(sched(tes), w, ValidationMode::AnyTopological).correct();
        CHECK((!f || a));
        fixed += f;
        any += a;
    } while (std::next_permutation(tes.begin(), tes.end()));
    auto g = graph_of(w);
    CHECK(fixed == oracle::all_correct(g, 2, true).size());
    CHECK(any == oracle::all_correct(g, 2, false).size());
    CHECK(fixed < any);
}

TEST_CASE("property: validator agrees with the brute-force oracle on random workflows") {
    std::mt19937_64 rng(31);
    RandomWorkflowOptions opts;
    opts.oltp = false;
    for (int iter = 0; iter < 60; ++iter) {
        auto wc = load_workload(random_workflow_doc(rng, opts));
        const auto& w = wc.catalog->workflow();
        auto g = graph_of(w);
        const std::size_t n = g.nodes.size();
        Round R = 1 + rng() % 3;
        while (R > 1 && R * n > 7) --R;
        for (auto mode : {ValidationMode::FixedOrder, ValidationMode::AnyTopological}) {
            bool fixed = mode == ValidationMode::FixedOrder;
            auto expected = oracle::all_correct(g, R, fixed);
            auto got = enumerate_correct_schedules(w, R, 100000, mode);
            REQUIRE(got.size() == expected.size());
            std::vector<std::vector<oracle::Entry>> got_e;
            for (const auto& s : got) got_e.push_back(entries_of(s));
            std::sort(got_e.begin(), got_e.end());
            std::sort(expected.begin(), expected.end());
            CHECK(got_e == expected);
        }
        // Random permutations, including ones with gaps from aborted TEs.
        std::vector<std::pair<std::string, Round>> tes;
        for (Round r = 1; r <= R; ++r)
            for (const auto& p : g.nodes)
                if (rng() % 5) tes.emplace_back(p, r);
        for (int k = 0; k < 20; ++k) {
            std::shuffle(tes.begin(), tes.end(), rng);
            auto s = sched(tes);
            CHECK(validate(s, w, ValidationMode::FixedOrder).correct() == oracle::correct(entries_of(s), g, true));
            CHECK(validate(s, w, ValidationMode::AnyTopological).correct() ==
                  oracle::correct(entries_of(s), g, false));
        }
    }
}

TEST_CASE("validation is a pure function") {
    auto cat = catalog_from(kDiamond);
    auto s = sched({{"a", 1}, {"c", 1}, {"b", 1}, {"d", 1}});
    auto r1 = validate(s, cat->workflow(), ValidationMode::FixedOrder);
    auto r2 = validate(s, cat->workflow(), ValidationMode::FixedOrder);
    CHECK(r1.violations.size() == r2.violations.size());
    CHECK_FALSE(r1.correct());
    CHECK(validate(s, cat->workflow(), ValidationMode::AnyTopological).correct());
}

TEST_CASE("window visibility") {
    const char* text = R"cfg(
[stream in]
schema = ["v:int"]
[window w]
schema = ["v:int"]
size = 2
slide = 1
owner = "sp1"
[table out]
schema = ["c:int"]
[procedure sp1]
kind = "border"
inputs = ["in"]
tables = ["out"]
body = ["copy in -> w", "aggregate w count(v) -> out"]
)cfg";
    PartitionOptions o;
    o.trace_windows = true;
    Partition p(catalog_from(text), o);
    for (BatchId r = 1; r <= 3; ++r)
        p.submit_client({"sp1", r, testutil::border_args(testutil::batch(r, {{Value{std::int64_t{1}}}})), Origin::Client});
    p.run_until_idle();
    const auto& trace = p.db().access_trace();
    REQUIRE_FALSE(trace.empty());
    CHECK(validate_window_visibility(trace).correct());
    // The window carries across rounds of its owner.
    std::set<Round> rounds;
    for (const auto& a : trace) rounds.insert(a.round);
    CHECK(rounds.size() == 3);

    CHECK(validate_window_visibility({}).correct());
    p.mutable_db().unchecked_window("w", Caller{"intruder", 9});
    auto rep = validate_window_visibility(p.db().access_trace());
    CHECK(rep.count(ViolationKind::WindowVisibility) == 1);
}
