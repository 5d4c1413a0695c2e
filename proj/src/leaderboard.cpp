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

#include "streamtx/leaderboard.hpp"

#include <algorithm>

#include "streamtx/context.hpp"
#include "streamtx/error.hpp"
#include "streamtx/ingest.hpp"

namespace streamtx {

namespace {

const Schema kVoteSchema({{"phone", ScalarType::Int}, {"contestant", ScalarType::Int}});
const Schema kBoardSchema({{"rank", ScalarType::Int}, {"contestant", ScalarType::Int}, {"votes", ScalarType::Int}});

std::int64_t as_int(const Value& v) { return std::get<std::int64_t>(v); }

Predicate eq(std::string col, std::int64_t v) { return Predicate::where(std::move(col), CmpOp::Eq, v); }

/// (contestant, votes) pairs ranked by `better`, first three.
template <typename Less>
std::vector<std::vector<Value>> board(std::vector<std::pair<std::int64_t, std::int64_t>> rows, Less better) {
    std::sort(rows.begin(), rows.end(), better);
    std::vector<std::vector<Value>> out;
    for (std::size_t i = 0; i < rows.size() && i < 3; ++i)
        out.push_back({static_cast<std::int64_t>(i + 1), rows[i].first, rows[i].second});
    return out;
}

bool most(const std::pair<std::int64_t, std::int64_t>& a, const std::pair<std::int64_t, std::int64_t>& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
}

bool fewest(const std::pair<std::int64_t, std::int64_t>& a, const std::pair<std::int64_t, std::int64_t>& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
}

void replace_rows(ProcContext& ctx, const std::string& table, const std::vector<std::vector<Value>>& rows) {
    ctx.erase(table, Predicate::all());
    for (const auto& r : rows) ctx.insert(table, r);
}

std::vector<std::pair<std::int64_t, std::int64_t>> counts_of(ProcContext& ctx) {
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    for (const auto& t : ctx.select("vote_counts")) out.emplace_back(as_int(t.values[0]), as_int(t.values[1]));
    return out;
}

void refresh_boards(ProcContext& ctx) {
    auto counts = counts_of(ctx);
    replace_rows(ctx, "top3", board(counts, most));
    replace_rows(ctx, "bottom3", board(counts, fewest));
}

void setup(ProcContext& ctx) {
    auto n = as_int(ctx.values().at(0));
    for (std::int64_t c = 1; c <= n; ++c) {
        ctx.insert("contestants", {c, std::int64_t{1}});
        ctx.insert("vote_counts", {c, std::int64_t{0}});
    }
    ctx.erase("lb_valid_count", Predicate::all());
    ctx.insert("lb_valid_count", {std::int64_t{0}});
    refresh_boards(ctx);
}

void validate(ProcContext& ctx) {
    std::vector<std::vector<Value>> accepted;
    std::set<std::int64_t> phones;
    for (const auto& t : ctx.input()) {
        auto phone = as_int(t.values[0]);
        auto c = as_int(t.values[1]);
        if (ctx.select("contestants", eq("id", c).and_where("active", CmpOp::Eq, std::int64_t{1})).empty())
            ctx.abort("contestant " + std::to_string(c) + " is not running");
        if (!phones.insert(phone).second || !ctx.select("votes", eq("phone", phone)).empty())
            ctx.abort("phone " + std::to_string(phone) + " already voted");
        ctx.insert("votes", t.values, t.meta.ts);
        accepted.push_back(t.values);
    }
    ctx.emit("lb_valid", std::move(accepted));
}

void maintain(ProcContext& ctx) {
    const auto& in = ctx.input();
    for (const auto& t : in) {
        auto c = as_int(t.values[1]);
        auto row = ctx.select("vote_counts", eq("id", c));
        std::int64_t n = row.empty() ? 0 : as_int(row.front().values[1]);
        ctx.erase("vote_counts", eq("id", c));
        ctx.insert("vote_counts", {c, n + 1});
    }
    refresh_boards(ctx);
    auto events = ctx.window_insert("lb_trend", in);
    for (const auto& ev : events) {
        std::map<std::int64_t, std::int64_t> recent;
        for (const auto& t : ev.contents) ++recent[as_int(t.values[1])];
        std::vector<std::pair<std::int64_t, std::int64_t>> rows;
        for (auto [c, n] : recent)
            if (!ctx.select("contestants", eq("id", c).and_where("active", CmpOp::Eq, std::int64_t{1})).empty())
                rows.emplace_back(c, n);
        replace_rows(ctx, "trending3", board(rows, most));
    }
    std::vector<std::vector<Value>> out;
    for (const auto& t : in) out.push_back(t.values);
    ctx.emit("lb_counted", std::move(out));
}

void make_remover(Catalog& cat, std::uint64_t period) {
    ProcedureDef def{"lb_remove", ProcedureKind::Interior, {"lb_counted"}, {}, {},
                     {"votes", "contestants", "vote_counts", "top3", "bottom3", "trending3", "lb_valid_count"}};
    cat.add_procedure(def, [period](ProcContext& ctx) {
        auto cur = ctx.select("lb_valid_count");
        std::int64_t valid = cur.empty() ? 0 : as_int(cur.front().values[0]);
        for (std::size_t i = 0; i < ctx.input().size(); ++i) {
            ++valid;
            if (valid % static_cast<std::int64_t>(period) != 0) continue;
            auto counts = counts_of(ctx);
            if (counts.size() <= 1) continue;
            auto lowest = *std::min_element(counts.begin(), counts.end(), fewest);
            auto c = lowest.first;
            ctx.erase("votes", eq("contestant", c));
            ctx.erase("contestants", eq("id", c));
            ctx.insert("contestants", {c, std::int64_t{0}});
            ctx.erase("vote_counts", eq("id", c));
            ctx.erase("trending3", eq("contestant", c));
            refresh_boards(ctx);
        }
        ctx.erase("lb_valid_count", Predicate::all());
        ctx.insert("lb_valid_count", {valid});
    });
}

std::vector<BoardRow> read_board(const Database& db, const std::string& table) {
    std::vector<BoardRow> out;
    for (const auto& [id, t] : db.public_table(table).rows())
        out.push_back({as_int(t.values[0]), as_int(t.values[1]), as_int(t.values[2])});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });
    return out;
}

} // namespace

std::shared_ptr<Catalog> leaderboard_catalog(const LeaderboardParams& p) {
    if (p.contestants < 1 || p.window < 1 || p.removal_period < 1)
        fail(ErrorCode::ConfigError, "leaderboard parameters must be positive");
    auto cat = std::make_shared<Catalog>();
    cat->add_stream({"lb_votes_in", kVoteSchema});
    cat->add_stream({"lb_valid", kVoteSchema});
    cat->add_stream({"lb_counted", kVoteSchema});
    cat->add_table({"votes", kVoteSchema, {"phone", "contestant"}});
    cat->add_table({"contestants", Schema({{"id", ScalarType::Int}, {"active", ScalarType::Int}}), {"id"}});
    cat->add_table({"vote_counts", Schema({{"id", ScalarType::Int}, {"votes", ScalarType::Int}}), {"id"}});
    cat->add_table({"top3", kBoardSchema, {}});
    cat->add_table({"bottom3", kBoardSchema, {}});
    cat->add_table({"trending3", kBoardSchema, {"contestant"}});
    cat->add_table({"lb_valid_count", Schema({{"n", ScalarType::Int}}), {}});
    cat->add_window({WindowSpec{"lb_trend", p.window, 1, "lb_maintain"}, kVoteSchema});

    cat->add_procedure({"lb_setup", ProcedureKind::Oltp, {}, {}, {},
                        {"contestants", "vote_counts", "top3", "bottom3", "lb_valid_count"}},
                       setup);
    cat->add_procedure({"lb_validate", ProcedureKind::Border, {"lb_votes_in"}, {"lb_valid"}, {}, {"votes", "contestants"}},
                       validate);
    cat->add_procedure({"lb_maintain", ProcedureKind::Interior, {"lb_valid"}, {"lb_counted"}, {},
                        {"contestants", "vote_counts", "top3", "bottom3", "trending3"}},
                       maintain);
    make_remover(*cat, p.removal_period);
    cat->add_procedure({"lb_leaderboard", ProcedureKind::Oltp, {}, {}, {}, {"top3"}}, [](ProcContext& ctx) {
        std::vector<std::vector<Value>> rows;
        for (auto& t : ctx.select("top3")) rows.push_back(std::move(t.values));
        std::sort(rows.begin(), rows.end());
        ctx.set_result(std::move(rows));
    });
    cat->add_nested_group({"lb_vote",
                           {"lb_validate", "lb_maintain", "lb_remove"},
                           {{"lb_validate", "lb_maintain"}, {"lb_maintain", "lb_remove"}},
                           {}});
    cat->finalize();
    return cat;
}

std::vector<Vote> read_votes(const std::filesystem::path& path) {
    std::vector<Vote> out;
    for (const auto& t : read_csv_feed(path, kVoteSchema)) out.push_back({as_int(t.values[0]), as_int(t.values[1])});
    return out;
}

Ticket leaderboard_setup(Partition& p, const LeaderboardParams& params) {
    return call_oltp(p, "lb_setup", {params.contestants});
}

Ticket submit_vote(Partition& p, const Vote& v, BatchId round) {
    ProcArgs a;
    a.batch = AtomicBatch{round, {Tuple{{v.phone, v.contestant}, {0, round, static_cast<std::int64_t>(round)}}}};
    if (auto* cache = p.input_cache()) cache->append("lb_votes_in", *a.batch);
    return p.submit_client(TERequest{"lb_validate", round, encode_args(a), Origin::Client});
}

LeaderboardState leaderboard_state(const Database& db) {
    LeaderboardState s;
    for (const auto& [id, t] : db.public_table("contestants").rows())
        if (as_int(t.values[1]) == 1) s.active.insert(as_int(t.values[0]));
    for (const auto& [id, t] : db.public_table("vote_counts").rows()) s.counts[as_int(t.values[0])] = as_int(t.values[1]);
    s.top3 = read_board(db, "top3");
    s.bottom3 = read_board(db, "bottom3");
    s.trending3 = read_board(db, "trending3");
    for (const auto& [id, t] : db.public_table("lb_valid_count").rows()) s.valid_votes = as_int(t.values[0]);
    s.winner = s.top3.empty() ? 0 : s.top3.front().contestant;
    return s;
}

} // namespace streamtx
