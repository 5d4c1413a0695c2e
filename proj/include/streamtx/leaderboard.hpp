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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include "streamtx/catalog.hpp"
#include "streamtx/partition.hpp"

namespace streamtx {

/// Vote-counting workflow: lb_validate records a vote, lb_maintain keeps the
/// per-contestant counts and the three boards, lb_remove drops the least
/// popular contestant every `removal_period` valid votes. The three run as
/// nested group lb_vote, one vote per round.
struct LeaderboardParams {
    std::int64_t contestants = 25;
    std::uint64_t window = 100;
    std::uint64_t removal_period = 1000;
};

struct Vote {
    std::int64_t phone = 0;
    std::int64_t contestant = 0;
};

struct BoardRow {
    std::int64_t rank = 0;
    std::int64_t contestant = 0;
    std::int64_t votes = 0;

    bool operator==(const BoardRow&) const = default;
};

struct LeaderboardState {
    std::set<std::int64_t> active;
    /// Active contestants only.
    std::map<std::int64_t, std::int64_t> counts;
    std::vector<BoardRow> top3;
    std::vector<BoardRow> bottom3;
    std::vector<BoardRow> trending3;
    std::int64_t valid_votes = 0;
    /// 0 when no contestant is left.
    std::int64_t winner = 0;

    bool operator==(const LeaderboardState&) const = default;
};

std::shared_ptr<Catalog> leaderboard_catalog(const LeaderboardParams& p);

/// CSV with header "phone,contestant".
std::vector<Vote> read_votes(const std::filesystem::path& path);

/// Registers the contestants and zeroed counts (OLTP procedure lb_setup).
Ticket leaderboard_setup(Partition& p, const LeaderboardParams& params);

/// Submits one vote as its own atomic batch.
Ticket submit_vote(Partition& p, const Vote& v, BatchId round);

LeaderboardState leaderboard_state(const Database& db);

} // namespace streamtx
