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

#include "streamtx/validator.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "streamtx/error.hpp"

namespace streamtx {

std::string_view to_string(ValidationMode m) {
    return m == ValidationMode::FixedOrder ? "fixed_order" : "any_topological";
}

std::string_view to_string(ViolationKind k) {
    switch (k) {
    case ViolationKind::WorkflowOrder: return "workflow_order";
    case ViolationKind::StreamOrder: return "stream_order";
    case ViolationKind::NestedInterleave: return "nested_interleave";
    case ViolationKind::NestedPartialOrder: return "nested_partial_order";
    case ViolationKind::WindowVisibility: return "window_visibility";
    }
    return "?";
}

std::size_t ValidationReport::count(ViolationKind k) const {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(), [&](const auto& v) { return v.kind == k; }));
}

namespace {

std::string te(const TransactionExecution& t) { return t.procedure + "@" + std::to_string(t.round); }

} // namespace

ValidationReport validate(const Schedule& s, const Workflow& w, ValidationMode mode) {
    ValidationReport rep;
    auto add = [&](ViolationKind k, const TransactionExecution& a, const TransactionExecution& b) {
        rep.violations.push_back({k, te(a), te(b), b.round});
    };

    // Streaming entries only; a group name stands for its head.
    std::vector<const TransactionExecution*> entries;
    for (const auto& e : s.entries) {
        const auto* def = w.find(e.procedure);
        if (!def) {
            if (w.find_group(e.procedure)) continue;
            fail(ErrorCode::UnknownProcedureInSchedule, e.procedure);
        }
        if (is_streaming(def->kind)) entries.push_back(&e);
    }

    // Stream order: strictly increasing rounds per procedure.
    std::map<std::string, const TransactionExecution*> last;
    for (const auto* e : entries) {
        auto it = last.find(e->procedure);
        if (it != last.end() && it->second->round >= e->round) add(ViolationKind::StreamOrder, *it->second, *e);
        last[e->procedure] = e;
    }

    // Workflow order within each round.
    std::map<Round, std::vector<const TransactionExecution*>> rounds;
    for (const auto* e : entries) rounds[e->round].push_back(e);
    for (const auto& [r, seq] : rounds) {
        for (std::size_t i = 0; i < seq.size(); ++i)
            for (std::size_t j = i + 1; j < seq.size(); ++j) {
                const auto& a = seq[i]->procedure;
                const auto& b = seq[j]->procedure;
                bool bad = mode == ValidationMode::FixedOrder ? w.order_index(a) > w.order_index(b)
                                                              : w.reaches(b, a);
                if (bad) add(ViolationKind::WorkflowOrder, *seq[i], *seq[j]);
            }
    }

    // Nested groups: per (group, round) the children form one contiguous run
    // of the full schedule, ordered by the partial order.
    for (const auto& g : w.nested_groups()) {
        std::set<std::string> kids(g.children.begin(), g.children.end());
        std::map<Round, std::vector<std::size_t>> positions;
        for (std::size_t i = 0; i < s.entries.size(); ++i)
            if (kids.count(s.entries[i].procedure)) positions[s.entries[i].round].push_back(i);
        for (const auto& [r, pos] : positions) {
            for (std::size_t i = pos.front(); i <= pos.back(); ++i) {
                const auto& e = s.entries[i];
                if (!kids.count(e.procedure) || e.round != r) add(ViolationKind::NestedInterleave, s.entries[pos.front()], e);
            }
            std::map<std::string, std::size_t> at;
            for (auto i : pos) at.emplace(s.entries[i].procedure, i);
            for (const auto& [a, b] : g.partial_order) {
                auto ia = at.find(a), ib = at.find(b);
                if (ia != at.end() && ib != at.end() && ia->second > ib->second)
                    add(ViolationKind::NestedPartialOrder, s.entries[ib->second], s.entries[ia->second]);
            }
        }
    }
    return rep;
}

std::vector<Schedule> enumerate_correct_schedules(const Workflow& w, Round rounds, std::size_t limit,
                                                  ValidationMode mode) {
    std::vector<std::string> procs;
    for (const auto& p : w.procedures())
        if (is_streaming(p.kind)) procs.push_back(p.name);
    std::sort(procs.begin(), procs.end());
    const std::size_t total = procs.size() * rounds;
    if (total > 12) fail(ErrorCode::TooLarge, std::to_string(total) + " transaction executions");

    // Candidates in lexicographic (round, name) order.
    std::vector<TransactionExecution> tes;
    for (Round r = 1; r <= rounds; ++r)
        for (const auto& p : procs) tes.push_back({p, r, {}, 0});

    std::vector<Schedule> out;
    std::vector<bool> used(tes.size(), false);
    Schedule cur;
    std::map<std::string, Round> done_round;
    std::set<std::pair<std::string, Round>> placed;
    const NestedGroup* open_group = nullptr;
    Round open_round = 0;
    std::size_t open_left = 0;

    auto allowed = [&](const TransactionExecution& t) {
        auto it = done_round.find(t.procedure);
        Round prev = it == done_round.end() ? 0 : it->second;
        if (prev != t.round - 1) return false;
        for (const auto& q : procs) {
            if (q == t.procedure || placed.count({q, t.round})) continue;
            bool before = mode == ValidationMode::FixedOrder ? w.order_index(q) < w.order_index(t.procedure)
                                                             : w.reaches(q, t.procedure);
            if (before) return false;
        }
        const auto* g = w.group_of(t.procedure);
        if (open_group && (g != open_group || t.round != open_round)) return false;
        if (g)
            for (const auto& [a, b] : g->partial_order)
                if (b == t.procedure && !placed.count({a, t.round})) return false;
        return true;
    };

    std::function<void()> dfs = [&] {
        if (out.size() >= limit) return;
        if (cur.entries.size() == tes.size()) {
            Schedule s = cur;
            for (std::size_t i = 0; i < s.entries.size(); ++i) s.entries[i].commit_seq = i + 1;
            if (validate(s, w, mode).correct()) out.push_back(std::move(s));
            return;
        }
        for (std::size_t i = 0; i < tes.size() && out.size() < limit; ++i) {
            if (used[i] || !allowed(tes[i])) continue;
            const auto& t = tes[i];
            auto saved = std::tuple(open_group, open_round, open_left);
            const auto* g = w.group_of(t.procedure);
            if (g && !open_group) {
                open_group = g;
                open_round = t.round;
                open_left = g->children.size();
            }
            if (open_group && --open_left == 0) open_group = nullptr;
            used[i] = true;
            placed.insert({t.procedure, t.round});
            auto prev = done_round[t.procedure];
            done_round[t.procedure] = t.round;
            cur.entries.push_back(t);
            dfs();
            cur.entries.pop_back();
            done_round[t.procedure] = prev;
            placed.erase({t.procedure, t.round});
            used[i] = false;
            std::tie(open_group, open_round, open_left) = saved;
        }
    };
    if (limit > 0) dfs();
    return out;
}

ValidationReport validate_window_visibility(const std::vector<WindowAccess>& trace) {
    ValidationReport rep;
    for (const auto& a : trace)
        if (a.accessor != a.owner)
            rep.violations.push_back({ViolationKind::WindowVisibility, a.accessor + "@" + std::to_string(a.round),
                                      a.window + " (owner " + a.owner + ")", a.round});
    return rep;
}

} // namespace streamtx
