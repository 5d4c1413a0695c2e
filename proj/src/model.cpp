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

#include "streamtx/model.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <set>
#include <unordered_set>

#include "streamtx/error.hpp"

namespace streamtx {

std::string_view to_string(ProcedureKind k) {
    switch (k) {
    case ProcedureKind::Oltp: return "oltp";
    case ProcedureKind::Border: return "border";
    case ProcedureKind::Interior: return "interior";
    }
    return "?";
}

const ProcedureDef* Workflow::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &procedures_[it->second];
}

const ProcedureDef& Workflow::get(std::string_view name) const {
    const auto* p = find(name);
    if (!p) fail(ErrorCode::UnknownProcedure, std::string(name));
    return *p;
}

std::size_t Workflow::order_index(std::string_view name) const {
    auto it = order_pos_.find(std::string(name));
    if (it == order_pos_.end()) fail(ErrorCode::UnknownProcedure, std::string(name));
    return it->second;
}

bool Workflow::reaches(std::string_view a, std::string_view b) const {
    auto ia = index_.find(std::string(a)), ib = index_.find(std::string(b));
    if (ia == index_.end() || ib == index_.end()) return false;
    return reach_[ia->second][ib->second];
}

const std::string& Workflow::producer_of(std::string_view stream) const {
    static const std::string empty;
    auto it = producer_.find(std::string(stream));
    return it == producer_.end() ? empty : it->second;
}

const std::string& Workflow::consumer_of(std::string_view stream) const {
    static const std::string empty;
    auto it = consumer_.find(std::string(stream));
    return it == consumer_.end() ? empty : it->second;
}

const NestedGroup* Workflow::group_of(std::string_view procedure) const {
    auto it = group_by_child_.find(std::string(procedure));
    return it == group_by_child_.end() ? nullptr : &groups_[it->second];
}

const NestedGroup* Workflow::find_group(std::string_view parent_name) const {
    for (const auto& g : groups_)
        if (g.parent_name == parent_name) return &g;
    return nullptr;
}

std::size_t Workflow::streaming_count() const {
    return static_cast<std::size_t>(
        std::count_if(procedures_.begin(), procedures_.end(), [](const auto& p) { return is_streaming(p.kind); }));
}

std::size_t Workflow::border_count() const {
    return static_cast<std::size_t>(std::count_if(procedures_.begin(), procedures_.end(),
                                                  [](const auto& p) { return p.kind == ProcedureKind::Border; }));
}

namespace {

void check_unique_names(const WorkflowDescription& d) {
    std::unordered_set<std::string> seen;
    auto claim = [&](const std::string& n, std::string_view what) {
        if (n.empty()) fail(ErrorCode::InvalidWorkflow, std::string(what) + " with empty name");
        if (!seen.insert(n).second) fail(ErrorCode::DuplicateName, n);
    };
    for (const auto& p : d.procedures) claim(p.name, "procedure");
    for (const auto& s : d.streams) claim(s, "stream");
    for (const auto& t : d.tables) claim(t, "table");
    std::unordered_map<std::string, std::string> window_owner;
    for (const auto& p : d.procedures)
        for (const auto& w : p.window_defs) {
            auto [it, fresh] = window_owner.emplace(w.name, p.name);
            if (!fresh) fail(ErrorCode::WindowOwnedByTwoProcedures, w.name);
            claim(w.name, "window");
        }
    for (const auto& g : d.nested_groups) claim(g.parent_name, "nested group");
}

} // namespace

Workflow register_workflow(const WorkflowDescription& desc) {
    check_unique_names(desc);

    Workflow w;
    w.procedures_ = desc.procedures;
    w.streams_ = desc.streams;
    w.tables_ = desc.tables;
    for (std::size_t i = 0; i < w.procedures_.size(); ++i) w.index_[w.procedures_[i].name] = i;

    std::unordered_set<std::string> streams(desc.streams.begin(), desc.streams.end());
    std::unordered_set<std::string> tables(desc.tables.begin(), desc.tables.end());

    for (const auto& p : w.procedures_) {
        for (const auto& s : p.stream_inputs) {
            if (!streams.count(s)) fail(ErrorCode::UnknownStream, s + " (input of " + p.name + ")");
            if (!w.consumer_.emplace(s, p.name).second)
                fail(ErrorCode::InvalidWorkflow, "stream " + s + " has more than one consumer");
        }
        for (const auto& s : p.stream_outputs) {
            if (!streams.count(s)) fail(ErrorCode::UnknownStream, s + " (output of " + p.name + ")");
            if (!w.producer_.emplace(s, p.name).second)
                fail(ErrorCode::InvalidWorkflow, "stream " + s + " has more than one producer");
        }
        for (const auto& t : p.table_inputs)
            if (!tables.count(t)) fail(ErrorCode::UnknownTable, t + " (used by " + p.name + ")");
        for (const auto& win : p.window_defs) {
            if (win.owner != p.name)
                fail(ErrorCode::WindowOwnedByTwoProcedures, win.name + " declared by " + p.name + " but owned by " + win.owner);
            if (win.size < 1 || win.slide < 1 || win.slide > win.size)
                fail(ErrorCode::InvalidWorkflow, "window " + win.name + " needs 1 <= slide <= size");
        }
    }

    for (const auto& p : w.procedures_) {
        switch (p.kind) {
        case ProcedureKind::Oltp:
            if (!p.stream_inputs.empty() || !p.window_defs.empty() || !p.stream_outputs.empty())
                fail(ErrorCode::InvalidWorkflow, "OLTP procedure " + p.name + " may not use streams or windows");
            break;
        case ProcedureKind::Border:
            if (p.stream_inputs.empty()) fail(ErrorCode::InvalidWorkflow, "border " + p.name + " has no input stream");
            for (const auto& s : p.stream_inputs)
                if (w.producer_.count(s))
                    fail(ErrorCode::InvalidWorkflow, "border " + p.name + " reads internal stream " + s);
            break;
        case ProcedureKind::Interior:
            if (p.stream_inputs.empty()) fail(ErrorCode::InvalidWorkflow, "interior " + p.name + " has no input stream");
            for (const auto& s : p.stream_inputs)
                if (!w.producer_.count(s))
                    fail(ErrorCode::InvalidWorkflow, "interior " + p.name + " reads external stream " + s);
            break;
        }
    }

    for (const auto& p : w.procedures_)
        for (const auto& s : p.stream_outputs) {
            auto c = w.consumer_.find(s);
            if (c != w.consumer_.end()) w.edges_.push_back({p.name, s, c->second});
        }

    // Ordering constraints: workflow edges plus nested-group partial orders.
    const std::size_t n = w.procedures_.size();
    std::vector<std::set<std::size_t>> succ(n);
    for (const auto& e : w.edges_) succ[w.index_.at(e.producer)].insert(w.index_.at(e.consumer));

    for (const auto& g : desc.nested_groups) {
        if (g.children.size() < 2) fail(ErrorCode::InvalidWorkflow, "nested group " + g.parent_name + " needs >= 2 children");
        std::unordered_set<std::string> kids;
        for (const auto& c : g.children) {
            const auto* p = w.find(c);
            if (!p) fail(ErrorCode::UnknownProcedure, c + " (child of " + g.parent_name + ")");
            if (!is_streaming(p->kind))
                fail(ErrorCode::InvalidWorkflow, "nested group child " + c + " must be a streaming procedure");
            if (!kids.insert(c).second) fail(ErrorCode::DuplicateName, c + " twice in " + g.parent_name);
            if (w.group_by_child_.count(c)) fail(ErrorCode::InvalidWorkflow, c + " belongs to two nested groups");
            w.group_by_child_[c] = w.groups_.size();
        }
        for (const auto& [a, b] : g.partial_order) {
            if (!kids.count(a) || !kids.count(b))
                fail(ErrorCode::InvalidWorkflow, "partial order of " + g.parent_name + " names a non-child");
            succ[w.index_.at(a)].insert(w.index_.at(b));
        }
        w.groups_.push_back(g);
    }

    // Kahn's method with lexicographic tie-break. Once a nested group has
    // started, its remaining children come next so the group stays contiguous.
    std::vector<std::size_t> indeg(n, 0);
    for (std::size_t u = 0; u < n; ++u)
        for (auto v : succ[u]) ++indeg[v];
    auto by_name = [&](std::size_t a, std::size_t b) { return w.procedures_[a].name < w.procedures_[b].name; };
    std::set<std::size_t, decltype(by_name)> ready(by_name);
    for (std::size_t u = 0; u < n; ++u)
        if (indeg[u] == 0) ready.insert(u);
    std::optional<std::size_t> open;
    std::vector<std::size_t> placed(w.groups_.size(), 0);
    while (!ready.empty()) {
        auto it = ready.begin();
        if (open) {
            auto in_open = std::find_if(ready.begin(), ready.end(), [&](std::size_t x) {
                auto g = w.group_by_child_.find(w.procedures_[x].name);
                return g != w.group_by_child_.end() && g->second == *open;
            });
            if (in_open != ready.end()) it = in_open;
        }
        auto u = *it;
        ready.erase(it);
        if (auto g = w.group_by_child_.find(w.procedures_[u].name); g != w.group_by_child_.end()) {
            open = ++placed[g->second] < w.groups_[g->second].children.size() ? std::optional(g->second) : std::nullopt;
        }
        w.order_pos_[w.procedures_[u].name] = w.order_.size();
        w.order_.push_back(w.procedures_[u].name);
        for (auto v : succ[u])
            if (--indeg[v] == 0) ready.insert(v);
    }
    if (w.order_.size() != n) fail(ErrorCode::CycleDetected, "workflow graph has a cycle");

    // Reachability over workflow edges only (partial orders are not data flow).
    w.reach_.assign(n, std::vector<bool>(n, false));
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& e : w.edges_) adj[w.index_.at(e.producer)].push_back(w.index_.at(e.consumer));
    for (std::size_t s = 0; s < n; ++s) {
        std::vector<std::size_t> stack(adj[s].begin(), adj[s].end());
        while (!stack.empty()) {
            auto v = stack.back();
            stack.pop_back();
            if (w.reach_[s][v]) continue;
            w.reach_[s][v] = true;
            stack.insert(stack.end(), adj[v].begin(), adj[v].end());
        }
    }

    for (auto& g : w.groups_) {
        g.execution_order = g.children;
        std::sort(g.execution_order.begin(), g.execution_order.end(),
                  [&](const auto& a, const auto& b) { return w.order_pos_.at(a) < w.order_pos_.at(b); });
        std::unordered_set<std::string> kids(g.children.begin(), g.children.end());
        for (std::size_t i = 1; i < g.execution_order.size(); ++i) {
            const auto& p = w.get(g.execution_order[i]);
            if (p.kind != ProcedureKind::Interior)
                fail(ErrorCode::InvalidWorkflow, "only the head of nested group " + g.parent_name + " may be a border");
            for (const auto& s : p.stream_inputs)
                if (!kids.count(w.producer_.at(s)))
                    fail(ErrorCode::InvalidWorkflow,
                         "child " + p.name + " of " + g.parent_name + " is fed from outside the group");
        }
    }
    return w;
}

std::vector<std::vector<std::string>> topological_orderings(const Workflow& w, std::size_t limit) {
    std::vector<std::vector<std::string>> out;
    if (limit == 0) return out;
    const auto& procs = w.procedures();
    const std::size_t n = procs.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return procs[a].name < procs[b].name; });

    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < n; ++i) pos[procs[idx[i]].name] = i;
    std::vector<std::vector<std::size_t>> succ(n);
    std::vector<std::size_t> indeg(n, 0);
    for (const auto& e : w.edges()) {
        succ[pos[e.producer]].push_back(pos[e.consumer]);
        ++indeg[pos[e.consumer]];
    }

    std::vector<bool> used(n, false);
    std::vector<std::string> current;
    std::function<void()> dfs = [&] {
        if (out.size() >= limit) return;
        if (current.size() == n) {
            out.push_back(current);
            return;
        }
        for (std::size_t u = 0; u < n && out.size() < limit; ++u) {
            if (used[u] || indeg[u] != 0) continue;
            used[u] = true;
            for (auto v : succ[u]) --indeg[v];
            current.push_back(procs[idx[u]].name);
            dfs();
            current.pop_back();
            for (auto v : succ[u]) ++indeg[v];
            used[u] = false;
        }
    };
    dfs();
    return out;
}

} // namespace streamtx
