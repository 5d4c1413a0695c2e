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

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <tuple>
#include <vector>

namespace oracle {

struct SimRow {
    std::int64_t rank, contestant, votes;
    bool operator==(const SimRow&) const = default;
};

/// Sequential leaderboard: one vote at a time, straight from the rules.
///  - a vote is valid if its contestant is still running and its phone has no
///    recorded vote; otherwise it is rejected and changes nothing
///  - top and bottom boards rank all running contestants by total votes
///    (ties by lower id)
///  - the trending board ranks running contestants by their share of the
///    last `window` valid votes; it is refreshed once `window` valid votes
///    exist and after every valid vote thereafter
///  - after every `period`-th valid vote the running contestant with the
///    fewest votes (lowest id on ties) leaves, unless only one is left; their
///    votes are returned, so those phones may vote again, and their trending
///    row disappears
class LeaderboardSim {
public:
    LeaderboardSim(std::int64_t contestants, std::size_t window, std::int64_t period) : window_(window), period_(period) {
        for (std::int64_t c = 1; c <= contestants; ++c) {
            running_.insert(c);
            tally_[c] = 0;
        }
        boards();
    }

    bool vote(std::int64_t phone, std::int64_t c) {
        if (!running_.count(c) || phone_to_.count(phone)) return false;
        phone_to_[phone] = c;
        ++tally_[c];
        ++valid_;
        recent_.push_back(c);
        if (recent_.size() > window_) recent_.pop_front();
        boards();
        if (recent_.size() == window_) trending();
        if (valid_ % period_ == 0 && running_.size() > 1) remove_lowest();
        return true;
    }

    std::set<std::int64_t> running() const { return running_; }
    std::map<std::int64_t, std::int64_t> tally() const { return tally_; }
    const std::vector<SimRow>& top() const { return top_; }
    const std::vector<SimRow>& bottom() const { return bottom_; }
    const std::vector<SimRow>& trend() const { return trend_; }
    std::int64_t valid() const { return valid_; }
    std::int64_t winner() const { return top_.empty() ? 0 : top_.front().contestant; }

private:
    static std::vector<SimRow> rank(std::vector<std::pair<std::int64_t, std::int64_t>> v, bool desc) {
        std::sort(v.begin(), v.end(), [&](const auto& a, const auto& b) {
            if (a.second != b.second) return desc ? a.second > b.second : a.second < b.second;
            return a.first < b.first;
        });
        std::vector<SimRow> out;
        for (std::size_t i = 0; i < v.size() && i < 3; ++i)
            out.push_back({static_cast<std::int64_t>(i + 1), v[i].first, v[i].second});
        return out;
    }

    void boards() {
        std::vector<std::pair<std::int64_t, std::int64_t>> v(tally_.begin(), tally_.end());
        top_ = rank(v, true);
        bottom_ = rank(v, false);
    }

    void trending() {
        std::map<std::int64_t, std::int64_t> n;
        for (auto c : recent_)
            if (running_.count(c)) ++n[c];
        trend_ = rank({n.begin(), n.end()}, true);
    }

    void remove_lowest() {
        std::int64_t worst = 0, fewest = 0;
        for (auto [c, n] : tally_)
            if (worst == 0 || n < fewest) {
                worst = c;
                fewest = n;
            }
        running_.erase(worst);
        tally_.erase(worst);
        for (auto it = phone_to_.begin(); it != phone_to_.end();)
            it = it->second == worst ? phone_to_.erase(it) : std::next(it);
        std::erase_if(trend_, [&](const SimRow& r) { return r.contestant == worst; });
        boards();
    }

    std::size_t window_;
    std::int64_t period_;
    std::set<std::int64_t> running_;
    std::map<std::int64_t, std::int64_t> tally_;
    std::map<std::int64_t, std::int64_t> phone_to_;
    std::deque<std::int64_t> recent_;
    std::int64_t valid_ = 0;
    std::vector<SimRow> top_, bottom_, trend_;
};

} // namespace oracle
