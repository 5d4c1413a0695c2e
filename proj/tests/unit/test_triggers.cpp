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

#include "helpers.hpp"
#include "streamtx/error.hpp"
#include "streamtx/ingest.hpp"

using namespace streamtx;
using testutil::batch;
using testutil::catalog_from;

namespace {

const char* kThreeStage = R"cfg(
[stream in]
schema = ["v:int"]
[stream a]
schema = ["v:int"]
[stream b]
schema = ["v:int"]
[stream c]
schema = ["v:int"]
[table sink]
schema = ["v:int"]
[procedure entry]
kind = "border"
inputs = ["in"]
tables = ["sink"]
[trigger in]
program = ["filtered_copy in -> a where v > 10"]
[trigger a]
program = ["filtered_copy a -> b where v > 10"]
[trigger b]
program = ["filtered_copy b -> c where v > 10", "filtered_copy b -> sink where v > 15"]
)cfg";

std::vector<std::int64_t> ints(const std::vector<Tuple>& ts) {
    std::vector<std::int64_t> out;
    for (const auto& t : ts) out.push_back(std::get<std::int64_t>(t.values[0]));
    return out;
}

} // namespace

TEST_CASE("a statement chain runs inside one transaction") {
    Partition p(catalog_from(kThreeStage));
    auto t = p.submit_client({"entry", 1, testutil::border_args(batch(1, {{std::int64_t{5}}, {std::int64_t{12}}, {std::int64_t{20}}})),
                              Origin::Client});
    p.run_until_idle();
    CHECK(t.get().committed);
    CHECK(p.committed_schedule().entries.size() == 1);
    const auto* c = p.db().stream_batch("c", 1);
    REQUIRE(c);
    CHECK(ints(*c) == std::vector<std::int64_t>{12, 20});
    CHECK(p.db().stream_empty("a"));
    CHECK(p.db().stream_empty("b"));
    CHECK(p.db().stream_empty("in"));
    CHECK(p.db().public_table("sink").rows().size() == 1);
    auto c1 = p.counters();
    CHECK(c1.ee_statement_executions == 4);
    CHECK(c1.pe_dispatches == 1);
    CHECK(c1.client_roundtrips == 1);
}

TEST_CASE("an abort reverts every statement-trigger write") {
    const std::string text = std::string(kThreeStage) + R"cfg(
[procedure gate]
kind = "border"
inputs = ["g"]
outputs = []
tables = ["sink"]
body = ["abort_if g where v = 0"]
[stream g]
schema = ["v:int"]
[trigger g]
program = ["filtered_copy g -> sink"]
)cfg";
    Partition p(catalog_from(text));
    auto before = p.db();
    auto t = p.submit_client({"gate", 1, testutil::border_args(batch(1, {{std::int64_t{7}}, {std::int64_t{0}}})), Origin::Client});
    p.run_until_idle();
    CHECK_FALSE(t.get().committed);
    CHECK(p.db().public_table("sink").rows().empty());
    CHECK(p.db().stream_empty("g"));
}

TEST_CASE("window triggers fire only on window events") {
    const char* text = R"cfg(
[stream in]
schema = ["v:int"]
[window w]
schema = ["v:int"]
size = 3
slide = 2
owner = "sp"
[table agg]
schema = ["s:int"]
[procedure sp]
kind = "border"
inputs = ["in"]
tables = ["agg"]
body = ["copy in -> w"]
[trigger w]
program = ["aggregate_insert w -> agg sum(v)"]
)cfg";
    Partition p(catalog_from(text));
    std::vector<std::size_t> rows_after;
    for (std::int64_t r = 1; r <= 6; ++r) {
        p.submit_client({"sp", static_cast<Round>(r), testutil::border_args(batch(r, {{r}})), Origin::Client});
        p.run_until_idle();
        rows_after.push_back(p.db().public_table("agg").rows().size());
    }
    CHECK(rows_after == std::vector<std::size_t>{0, 0, 1, 1, 2, 2});
    std::vector<std::int64_t> got;
    for (const auto& [id, t] : p.db().public_table("agg").rows()) got.push_back(std::get<std::int64_t>(t.values[0]));
    CHECK(got == std::vector<std::int64_t>{6, 12});
}

TEST_CASE("an empty program is a no-op") {
    const char* text = R"cfg(
[stream in]
schema = ["v:int"]
[procedure sp]
kind = "border"
inputs = ["in"]
[trigger in]
program = []
)cfg";
    Partition p(catalog_from(text));
    auto t = p.submit_client({"sp", 1, testutil::border_args(batch(1, {{std::int64_t{1}}})), Origin::Client});
    p.run_until_idle();
    CHECK(t.get().committed);
    CHECK(p.counters().ee_statement_executions == 0);
}

TEST_CASE("procedure triggers enqueue the consumer for the same round") {
    Partition p(catalog_from(testutil::kTwoChain));
    p.submit_client({"sp1", 1, testutil::border_args(batch(1, {{std::int64_t{4}}})), Origin::Client});
    REQUIRE(p.step());
    auto fast = p.fast_track_contents();
    REQUIRE(fast.size() == 1);
    CHECK(fast[0].procedure == "sp2");
    CHECK(fast[0].round == 1);
    CHECK(fast[0].origin == Origin::Trigger);
    p.run_until_idle();
    CHECK(testutil::names_of(p.committed_schedule()) == std::vector<std::string>{"sp1@1", "sp2@1"});
    CHECK(p.counters().trigger_dispatches == 1);
}

TEST_CASE("no output batch means no downstream request") {
    const char* text = R"cfg(
[stream in]
schema = ["v:int"]
[stream s]
schema = ["v:int"]
[procedure sp1]
kind = "border"
inputs = ["in"]
outputs = ["s"]
body = ["copy in -> s where v > 100"]
[procedure sp2]
kind = "interior"
inputs = ["s"]
)cfg";
    Partition p(catalog_from(text));
    p.submit_client({"sp1", 1, testutil::border_args(batch(1, {{std::int64_t{4}}})), Origin::Client});
    REQUIRE(p.step());
    CHECK(p.fast_track_contents().empty());
    p.run_until_idle();
    CHECK(p.committed_schedule().entries.size() == 1);
}

TEST_CASE("disabled procedure triggers") {
    Partition p(catalog_from(testutil::kTwoChain));
    p.set_pe_triggers_enabled(false);
    p.set_pe_triggers_enabled(false);
    CHECK_FALSE(p.pe_triggers_enabled());
    p.submit_client({"sp1", 1, testutil::border_args(batch(1, {{std::int64_t{4}}})), Origin::Client});
    p.run_until_idle();
    CHECK(p.fast_track_contents().empty());
    CHECK(p.committed_schedule().entries.size() == 1);
    CHECK_FALSE(p.db().stream_empty("s"));
    p.set_pe_triggers_enabled(true);
    p.submit_client({"sp1", 2, testutil::border_args(batch(2, {{std::int64_t{5}}})), Origin::Client});
    p.run_until_idle();
    CHECK(testutil::names_of(p.committed_schedule()) == std::vector<std::string>{"sp1@1", "sp1@2", "sp2@2"});
}

TEST_CASE("refire enqueues pending stream batches in order") {
    SUBCASE("pending batches") {
        Partition p(catalog_from(testutil::kTwoChain));
        p.set_pe_triggers_enabled(false);
        for (Round r : {4, 5}) {
            p.submit_client({"sp1", r, testutil::border_args(batch(r, {{std::int64_t{1}}})), Origin::Client});
            p.run_until_idle();
        }
        p.set_pe_triggers_enabled(true);
        auto req = p.refire_nonempty_streams();
        REQUIRE(req.size() == 2);
        CHECK(req[0].procedure == "sp2");
        CHECK(req[0].round == 4);
        CHECK(req[1].round == 5);
        p.run_until_idle();
        CHECK(p.db().stream_empty("s"));
    }
    SUBCASE("nothing pending") {
        Partition p(catalog_from(testutil::kTwoChain));
        CHECK(p.refire_nonempty_streams().empty());
    }
    SUBCASE("a border input is not refired") {
        Partition p(catalog_from(testutil::kTwoChain));
        p.mutable_db().append_to_stream("in", 3, {{std::int64_t{1}}}, 0, nullptr);
        CHECK(p.refire_nonempty_streams().empty());
    }
}

TEST_CASE("procedure triggers on windows are rejected") {
    const char* text = R"cfg(
[stream in]
schema = ["v:int"]
[window w]
schema = ["v:int"]
size = 2
slide = 1
owner = "sp"
[procedure sp]
kind = "border"
inputs = ["in"]
[procedure down]
kind = "interior"
inputs = ["w"]
)cfg";
    CHECK_THROWS_AS(catalog_from(text), Error);
}
