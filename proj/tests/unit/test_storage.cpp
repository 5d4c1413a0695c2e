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

#include <map>
#include <random>

#include "../oracles/undo_oracle.hpp"
#include "helpers.hpp"
#include "streamtx/error.hpp"
#include "streamtx/storage.hpp"

using namespace streamtx;
using testutil::code_of;

namespace {

const Schema kKV({{"k", ScalarType::Int}, {"v", ScalarType::Int}});
const Caller kOwner{"own", 1};
const Caller kStranger{"other", 1};

Tuple row(std::int64_t k, std::int64_t v) { return Tuple{{k, v}, {}}; }


} // namespace

TEST_CASE("public table inserts are a multiset") {
    auto db = oracle::undo_fixture();
    db.insert("t", row(1, 10), kOwner, nullptr);
    CHECK(db.public_table("t").rows().size() == 1);
    db.insert("t", row(1, 10), kOwner, nullptr);
    CHECK(db.select_where("t", Predicate::where("k", CmpOp::Eq, std::int64_t{1}), kOwner).size() == 2);
    CHECK(db.select_where("t", Predicate::where("k", CmpOp::Eq, std::int64_t{2}), kOwner).empty());
}

TEST_CASE("storage errors") {
    auto db = oracle::undo_fixture();
    CHECK(code_of([&] { db.insert("nope", row(1, 1), kOwner, nullptr); }) == ErrorCode::UnknownTable);
    CHECK(code_of([&] { db.insert("t", Tuple{{std::int64_t{1}}, {}}, kOwner, nullptr); }) == ErrorCode::TypeMismatch);
    CHECK(code_of([&] { db.insert("t", Tuple{{std::int64_t{1}, std::string("x")}, {}}, kOwner, nullptr); }) ==
          ErrorCode::TypeMismatch);
    std::vector<Tuple> one{row(1, 1)};
    CHECK(code_of([&] { db.window_insert("w", one, kStranger, nullptr); }) == ErrorCode::WindowScopeViolation);
    CHECK(code_of([&] { db.select_where("w", Predicate::all(), kStranger); }) == ErrorCode::WindowScopeViolation);
    CHECK(code_of([&] { db.select_where("t", Predicate::where("zz", CmpOp::Eq, std::int64_t{1}), kOwner); }) ==
          ErrorCode::UnknownColumn);
}

TEST_CASE("window reads see active tuples only") {
    Database db;
    db.create_window(WindowSpec{"w", 2, 1, "own"}, kKV);
    std::vector<Tuple> ab{row(1, 0), row(2, 0)};
    db.window_insert("w", ab, kOwner, nullptr);
    // Force a staged tuple with a slide-2 window of size 2 instead.
    Database db2;
    db2.create_window(WindowSpec{"w", 2, 2, "own"}, kKV);
    std::vector<Tuple> abc{row(1, 0), row(2, 0), row(3, 0)};
    db2.window_insert("w", abc, kOwner, nullptr);
    auto seen = db2.select_where("w", Predicate::all(), kOwner);
    REQUIRE(seen.size() == 2);
    CHECK(seen[0].values[0] == Value{std::int64_t{1}});
    CHECK(seen[1].values[0] == Value{std::int64_t{2}});
    CHECK(db2.window_table("w").staged().size() == 1);
    CHECK(db.select_where("w", Predicate::all(), kOwner).size() == 2);
}

TEST_CASE("empty table selects nothing") {
    auto db = oracle::undo_fixture();
    CHECK(db.select_where("t", Predicate::all(), kOwner).empty());
}

TEST_CASE("property: indexed lookups equal full scans") {
    std::mt19937_64 rng(3);
    PublicTable indexed("t", kKV, {"k"});
    std::uniform_int_distribution<std::int64_t> key(0, 49);
    for (int i = 0; i < 1000; ++i) indexed.insert(row(key(rng), i));
    for (int i = 0; i < 200; ++i) {
        auto ids = indexed.match(BoundPredicate(Predicate::where("k", CmpOp::Eq, key(rng)), kKV));
        if (!ids.empty() && i % 3 == 0) indexed.erase(ids.front());
    }
    for (std::int64_t k = -1; k <= 50; ++k) {
        BoundPredicate p(Predicate::where("k", CmpOp::Eq, k).and_where("v", CmpOp::Ge, std::int64_t{100}), kKV);
        CHECK(indexed.match(p) == indexed.scan(p));
        BoundPredicate q(Predicate::where("k", CmpOp::Eq, k), kKV);
        CHECK(indexed.match(q) == indexed.scan(q));
    }
}

TEST_CASE("delete_where") {
    Database db;
    db.create_stream("s", kKV);
    db.append_to_stream("s", 3, {{std::int64_t{1}, std::int64_t{1}}}, 0, nullptr);
    db.append_to_stream("s", 4, {{std::int64_t{2}, std::int64_t{2}}}, 0, nullptr);
    CHECK(db.delete_where("s", Predicate::where(std::string(kBatchIdColumn), CmpOp::Eq, std::int64_t{3}), kOwner,
                          nullptr) == 1);
    CHECK(db.pending_batches("s") == std::vector<BatchId>{4});
    CHECK(db.delete_where("s", Predicate::none(), kOwner, nullptr) == 0);
    CHECK(db.delete_where("s", Predicate::parse("false"), kOwner, nullptr) == 0);
}

TEST_CASE("delete then roll back restores the table") {
    auto db = oracle::undo_fixture();
    for (int i = 0; i < 10; ++i) db.insert("t", row(i % 3, i), kOwner, nullptr);
    auto before = db;
    UndoBuffer undo;
    CHECK(db.delete_where("t", Predicate::where("k", CmpOp::Eq, std::int64_t{1}), kOwner, &undo) == 3);
    CHECK_FALSE(db == before);
    db.rollback(undo);
    CHECK(db == before);
}

TEST_CASE("property: undo restores every touched table bit-exactly") {
    std::mt19937_64 rng(2024);
    for (int iter = 0; iter < 1000; ++iter) {
        auto db = oracle::undo_fixture();
        UndoBuffer warm;
        oracle::random_mutations(db, warm, rng, static_cast<int>(rng() % 12));
        auto copy = db;
        UndoBuffer undo;
        oracle::random_mutations(db, undo, rng, 1 + static_cast<int>(rng() % 20));
        db.rollback(undo);
        REQUIRE(db == copy);
        CHECK(db.public_table("t").next_rowid() == copy.public_table("t").next_rowid());
    }
}

TEST_CASE("aggregates") {
    auto db = oracle::undo_fixture();
    auto count = db.aggregate("t", AggOp::Count, "v", std::nullopt, kOwner);
    REQUIRE(count.size() == 1);
    CHECK(count[0][0] == Value{std::int64_t{0}});
    CHECK(db.aggregate("t", AggOp::Sum, "v", std::nullopt, kOwner).empty());
    for (int v : {1, 2, 3}) db.insert("t", row(v == 3 ? 2 : 1, v), kOwner, nullptr);
    CHECK(db.aggregate("t", AggOp::Sum, "v", std::nullopt, kOwner)[0][0] == Value{std::int64_t{6}});
    CHECK(std::get<double>(db.aggregate("t", AggOp::Avg, "v", std::nullopt, kOwner)[0][0]) == doctest::Approx(2.0));
    CHECK(db.aggregate("t", AggOp::Min, "v", std::nullopt, kOwner)[0][0] == Value{std::int64_t{1}});
    CHECK(db.aggregate("t", AggOp::Max, "v", std::nullopt, kOwner)[0][0] == Value{std::int64_t{3}});
}

TEST_CASE("property: grouped counts equal a brute-force tally") {
    std::mt19937_64 rng(8);
    Database db;
    Schema votes({{"phone", ScalarType::Int}, {"contestant", ScalarType::Text}});
    db.create_public("votes", votes);
    std::map<std::string, std::int64_t> tally;
    for (int i = 0; i < 300; ++i) {
        std::string c(1, static_cast<char>('A' + rng() % 5));
        db.insert("votes", Tuple{{std::int64_t{i}, c}, {}}, kOwner, nullptr);
        ++tally[c];
    }
    auto rows = db.aggregate("votes", AggOp::Count, "phone", "contestant", kOwner);
    REQUIRE(rows.size() == tally.size());
    std::size_t i = 0;
    for (const auto& [c, n] : tally) {
        CHECK(rows[i][0] == Value{c});
        CHECK(rows[i][1] == Value{n});
        ++i;
    }
}

TEST_CASE("garbage collection is per batch and idempotent") {
    Database db;
    db.create_stream("s", kKV);
    std::vector<std::vector<Value>> five(5, {std::int64_t{1}, std::int64_t{1}});
    db.append_to_stream("s", 2, five, 0, nullptr);
    db.append_to_stream("s", 3, {{std::int64_t{1}, std::int64_t{1}}}, 0, nullptr);
    CHECK(db.garbage_collect("s", 2) == 5);
    CHECK(db.garbage_collect("s", 2) == 0);
    CHECK(db.pending_batches("s") == std::vector<BatchId>{3});
}

TEST_CASE("tuple ids strictly increase within a stream") {
    Database db;
    db.create_stream("s", kKV);
    TupleId last = 0;
    for (BatchId b = 1; b <= 5; ++b) {
        auto stored = db.append_to_stream("s", b, {{std::int64_t{1}, std::int64_t{2}}, {std::int64_t{3}, std::int64_t{4}}},
                                          0, nullptr);
        for (const auto& t : stored) {
            CHECK(t.meta.tuple_id > last);
            CHECK(t.meta.batch_id == b);
            last = t.meta.tuple_id;
        }
    }
}

TEST_CASE("snapshot round trip") {
    SUBCASE("empty database") {
        Database db;
        Database back;
        back.restore_state(db.snapshot_state(0, 0));
        CHECK(back == db);
    }
    SUBCASE("random state with pending stream batches and staged window tuples") {
        std::mt19937_64 rng(99);
        for (int iter = 0; iter < 20; ++iter) {
            auto db = oracle::undo_fixture();
            db.create_public("big", Schema({{"a", ScalarType::Int}, {"b", ScalarType::Float}, {"c", ScalarType::Text}}),
                             {"a"});
            for (int i = 0; i < 500; ++i)
                db.insert("big", Tuple{{static_cast<std::int64_t>(rng() % 100), static_cast<double>(rng() % 1000) / 7.0,
                                        "t" + std::to_string(rng() % 50)},
                                       {}},
                          kOwner, nullptr);
            UndoBuffer u;
            oracle::random_mutations(db, u, rng, 40);
            db.progress().last_round["own"] = 7;
            db.progress().dropped.insert({"own", 3});
            auto blob = db.snapshot_state(2, 77);
            Database back;
            auto h = back.restore_state(blob);
            CHECK(h.partition == 2);
            CHECK(h.commit_seq == 77);
            CHECK(back == db);
            CHECK(back.snapshot_state(2, 77) == blob);
        }
    }
    SUBCASE("corruption is detected") {
        auto db = oracle::undo_fixture();
        db.insert("t", row(1, 2), kOwner, nullptr);
        auto blob = db.snapshot_state(0, 1);
        auto bad = blob;
        bad[bad.size() / 2] ^= 0x40;
        Database back;
        CHECK(code_of([&] { back.restore_state(bad); }) == ErrorCode::CorruptSnapshot);
        auto torn = blob;
        torn.resize(torn.size() - 3);
        CHECK(code_of([&] { back.restore_state(torn); }) == ErrorCode::CorruptSnapshot);
        auto version = blob;
        version[8] = 9;
        CHECK_THROWS_AS(back.restore_state(version), Error);
    }
}
