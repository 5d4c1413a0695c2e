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

#include "helpers.hpp"
#include "streamtx/error.hpp"
#include "streamtx/model.hpp"

using namespace streamtx;
using testutil::code_of;

namespace {

ProcedureDef proc(std::string name, ProcedureKind kind, std::vector<std::string> in, std::vector<std::string> out = {}) {
    return {std::move(name), kind, std::move(in), std::move(out), {}, {}};
}

WorkflowDescription diamond() {
    WorkflowDescription d;
    d.streams = {"x", "ab", "ac", "bd", "cd"};
    d.procedures = {proc("A", ProcedureKind::Border, {"x"}, {"ab", "ac"}), proc("B", ProcedureKind::Interior, {"ab"}, {"bd"}),
                    proc("C", ProcedureKind::Interior, {"ac"}, {"cd"}),
                    proc("D", ProcedureKind::Interior, {"bd", "cd"})};
    return d;
}


} // namespace

TEST_CASE("register_workflow orders a two-step chain") {
    WorkflowDescription d;
    d.streams = {"in", "s"};
    d.procedures = {proc("SP2", ProcedureKind::Interior, {"s"}), proc("SP1", ProcedureKind::Border, {"in"}, {"s"})};
    auto w = register_workflow(d);
    CHECK(w.chosen_order() == std::vector<std::string>{"SP1", "SP2"});
    REQUIRE(w.edges().size() == 1);
    CHECK(w.edges()[0] == Edge{"SP1", "s", "SP2"});
    CHECK(w.producer_of("s") == "SP1");
    CHECK(w.consumer_of("s") == "SP2");
    CHECK(w.producer_of("in").empty());
}

TEST_CASE("a single OLTP procedure is its own order") {
    WorkflowDescription d;
    d.procedures = {proc("q", ProcedureKind::Oltp, {})};
    CHECK(register_workflow(d).chosen_order() == std::vector<std::string>{"q"});
}

TEST_CASE("registration errors") {
    WorkflowDescription cyc;
    cyc.streams = {"x", "ab", "ba"};
    cyc.procedures = {proc("A", ProcedureKind::Interior, {"ba"}, {"ab"}), proc("B", ProcedureKind::Interior, {"ab"}, {"ba"})};
    CHECK(code_of([&] { register_workflow(cyc); }) == ErrorCode::CycleDetected);

    WorkflowDescription unknown;
    unknown.streams = {"x"};
    unknown.procedures = {proc("A", ProcedureKind::Border, {"nope"})};
    CHECK(code_of([&] { register_workflow(unknown); }) == ErrorCode::UnknownStream);

    WorkflowDescription dup;
    dup.streams = {"x"};
    dup.procedures = {proc("A", ProcedureKind::Border, {"x"}), proc("A", ProcedureKind::Oltp, {})};
    CHECK(code_of([&] { register_workflow(dup); }) == ErrorCode::DuplicateName);

    WorkflowDescription two_owners;
    two_owners.streams = {"x", "y"};
    auto a = proc("A", ProcedureKind::Border, {"x"});
    auto b = proc("B", ProcedureKind::Border, {"y"});
    a.window_defs = {WindowSpec{"w", 2, 1, "A"}};
    b.window_defs = {WindowSpec{"w", 2, 1, "B"}};
    two_owners.procedures = {a, b};
    CHECK(code_of([&] { register_workflow(two_owners); }) == ErrorCode::WindowOwnedByTwoProcedures);

    WorkflowDescription oltp_stream;
    oltp_stream.streams = {"x"};
    oltp_stream.procedures = {proc("A", ProcedureKind::Oltp, {"x"})};
    CHECK(code_of([&] { register_workflow(oltp_stream); }) == ErrorCode::InvalidWorkflow);
}

TEST_CASE("topological orderings of small graphs") {
    WorkflowDescription chain;
    chain.streams = {"x", "ab", "bc"};
    chain.procedures = {proc("A", ProcedureKind::Border, {"x"}, {"ab"}), proc("B", ProcedureKind::Interior, {"ab"}, {"bc"}),
                        proc("C", ProcedureKind::Interior, {"bc"})};
    CHECK(topological_orderings(register_workflow(chain), 10) ==
          std::vector<std::vector<std::string>>{{"A", "B", "C"}});

    CHECK(topological_orderings(register_workflow(diamond()), 10) ==
          std::vector<std::vector<std::string>>{{"A", "B", "C", "D"}, {"A", "C", "B", "D"}});

    WorkflowDescription free;
    free.streams = {"x", "y", "z"};
    free.procedures = {proc("A", ProcedureKind::Border, {"x"}), proc("B", ProcedureKind::Border, {"y"}),
                       proc("C", ProcedureKind::Border, {"z"})};
    auto all = topological_orderings(register_workflow(free), 6);
    CHECK(all.size() == 6);
    CHECK(topological_orderings(register_workflow(free), 2).size() == 2);
}

TEST_CASE("a nested group stays contiguous in the chosen order") {
    // A feeds B and C; the group (A, C) would be split by B under a plain
    // lexicographic tie-break.
    WorkflowDescription d;
    d.streams = {"x", "ab", "ac"};
    d.procedures = {proc("A", ProcedureKind::Border, {"x"}, {"ab", "ac"}), proc("B", ProcedureKind::Interior, {"ab"}),
                    proc("C", ProcedureKind::Interior, {"ac"})};
    d.nested_groups.push_back(NestedGroup{"g", {"A", "C"}, {{"A", "C"}}, {}});
    auto w = register_workflow(d);
    CHECK(w.chosen_order() == std::vector<std::string>{"A", "C", "B"});
    d.nested_groups.clear();
    CHECK(register_workflow(d).chosen_order() == std::vector<std::string>{"A", "B", "C"});
}

TEST_CASE("batch rounds are batch ids") {
    CHECK(batch_round(AtomicBatch{1, {}}) == 1);
    CHECK(batch_round(AtomicBatch{7, {}}) == 7);
    CHECK(batch_round(AtomicBatch{3, {}}) + 1 == batch_round(AtomicBatch{4, {}}));
}

TEST_CASE("property: orderings match a brute-force permutation filter on random DAGs") {
    std::mt19937_64 rng(11);
    for (int iter = 0; iter < 200; ++iter) {
        std::size_t n = 1 + rng() % 7;
        WorkflowDescription d;
        std::vector<std::vector<std::string>> ins(n), outs(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (rng() % 3 == 0) {
                    auto s = "s" + std::to_string(i) + "_" + std::to_string(j);
                    d.streams.push_back(s);
                    outs[i].push_back(s);
                    ins[j].push_back(s);
                }
        // Shuffle names so the lexicographic tie-break is exercised.
        std::vector<std::string> names;
        for (std::size_t i = 0; i < n; ++i) names.push_back(std::string(1, static_cast<char>('A' + i)));
        std::shuffle(names.begin(), names.end(), rng);
        for (std::size_t i = 0; i < n; ++i) {
            bool border = ins[i].empty();
            if (border) {
                d.streams.push_back("x" + names[i]);
                ins[i].push_back("x" + names[i]);
            }
            d.procedures.push_back(proc(names[i], border ? ProcedureKind::Border : ProcedureKind::Interior, ins[i], outs[i]));
        }
        auto w = register_workflow(d);
        auto g = testutil::graph_of(w);
        auto expected = oracle::topo_orders(g);
        auto got = topological_orderings(w, 100000);
        CHECK(got == expected);
        for (const auto& e : w.edges()) CHECK(w.order_index(e.producer) < w.order_index(e.consumer));
        CHECK(w.chosen_order() == expected.front());
    }
}
