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

#include "streamtx/config.hpp"
#include "streamtx/error.hpp"
#include "streamtx/workload.hpp"

using namespace streamtx;

TEST_CASE("parse typed values") {
    auto doc = ConfigDoc::parse(R"cfg(
# comment
[engine]
mode = "triggered"   # trailing comment
partitions = 4
delay = 2.5
sync = false
neg = -3
[stream in]
schema = ["k:int",
          "v:float"]
)cfg");
    REQUIRE(doc.sections.size() == 2);
    const auto* e = doc.find("engine", "");
    REQUIRE(e);
    CHECK(e->get_string("mode", "") == "triggered");
    CHECK(e->get_int("partitions", 0) == 4);
    CHECK(e->get_double("delay", 0) == doctest::Approx(2.5));
    CHECK(e->get_double("partitions", 0) == doctest::Approx(4.0));
    CHECK_FALSE(e->get_bool("sync", true));
    CHECK(e->get_int("neg", 0) == -3);
    CHECK(e->get_int("missing", 9) == 9);
    CHECK(doc.find("stream", "in")->get_strings("schema") == std::vector<std::string>{"k:int", "v:float"});
}

TEST_CASE("config errors name the problem") {
    CHECK_THROWS_AS(ConfigDoc::parse("[engine]\nmode = \"a\"\nmode = \"b\"\n"), Error);
    CHECK_THROWS_AS(ConfigDoc::parse("key = 1\n"), Error);
    CHECK_THROWS_AS(ConfigDoc::parse("[engine\n"), Error);
    CHECK_THROWS_AS(ConfigDoc::parse("[engine]\nx = \"open\n"), Error);
    auto doc = ConfigDoc::parse("[engine]\npartitions = \"two\"\n");
    CHECK_THROWS_AS(doc.sections[0].get_int("partitions", 1), Error);
    CHECK_THROWS_AS(load_workload(ConfigDoc::parse("[engine]\nbogus = 1\n")), Error);
    CHECK_THROWS_AS(load_workload(ConfigDoc::parse("[nonsense x]\n")), Error);
}

TEST_CASE("serialize then parse is a fixpoint for built-in workloads") {
    std::vector<ConfigDoc> docs{ee_chain_doc(3, EngineMode::Triggered), ee_chain_doc(3, EngineMode::ClientDriven),
                                pe_chain_doc(4), window_doc(8, 2, EngineMode::Triggered),
                                window_doc(8, 2, EngineMode::ClientDriven), scaling_doc(3)};
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) docs.push_back(random_workflow_doc(rng));
    for (const auto& d : docs) {
        auto text = d.serialize();
        auto again = ConfigDoc::parse(text);
        CHECK(again == d);
        CHECK(again.serialize() == text);
        CHECK_NOTHROW(load_workload(again));
    }
}

TEST_CASE("property: random documents round-trip") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> pick(0, 4);
    for (int iter = 0; iter < 300; ++iter) {
        ConfigDoc d;
        int sections = 1 + static_cast<int>(rng() % 4);
        for (int s = 0; s < sections; ++s) {
            auto& sec = d.add("k" + std::to_string(rng() % 3), s % 2 ? "n" + std::to_string(s) : "");
            int keys = static_cast<int>(rng() % 5);
            for (int k = 0; k < keys; ++k) {
                ConfigValue v;
                switch (pick(rng)) {
                case 0: v = ConfigValue(static_cast<std::int64_t>(rng() % 2001) - 1000); break;
                case 1: v = ConfigValue(static_cast<double>(rng() % 10000) / 64.0 - 50.0); break;
                case 2: v = ConfigValue(std::string("t \"q\" \\ #") + std::to_string(rng() % 100)); break;
                case 3: v = ConfigValue(rng() % 2 == 0); break;
                default: v = ConfigValue(ConfigValue::List{ConfigValue(std::int64_t{1}), ConfigValue(std::string("x"))});
                }
                sec.set("key" + std::to_string(k), v);
            }
        }
        auto again = ConfigDoc::parse(d.serialize());
        CHECK(again == d);
    }
}
