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

#include "streamtx/catalog.hpp"

#include <functional>
#include <set>

#include "streamtx/error.hpp"

namespace streamtx {

std::string describe(const Statement& s) {
    return std::visit(
        [](const auto& st) -> std::string {
            using S = std::decay_t<decltype(st)>;
            if constexpr (std::is_same_v<S, FilteredCopy>)
                return "filtered_copy " + st.src + " -> " + st.dst + " where " + st.predicate.to_string();
            else if constexpr (std::is_same_v<S, WindowInsertStmt>)
                return "window_insert " + st.src + " -> " + st.window;
            else if constexpr (std::is_same_v<S, AggregateInsert>)
                return "aggregate_insert " + st.window + " -> " + st.dst + " " + std::string(to_string(st.op)) + "(" +
                       st.column + ")" + (st.group_by ? " by " + *st.group_by : "");
            else
                return "delete_batch " + st.src;
        },
        s);
}

void Catalog::add_table(TableDecl t) {
    if (finalized()) fail(ErrorCode::InvalidWorkflow, "catalog is final");
    tables_.push_back(std::move(t));
}

void Catalog::add_stream(StreamDecl s) {
    if (finalized()) fail(ErrorCode::InvalidWorkflow, "catalog is final");
    streams_.push_back(std::move(s));
}

void Catalog::add_window(WindowDecl w) {
    if (finalized()) fail(ErrorCode::InvalidWorkflow, "catalog is final");
    windows_.push_back(std::move(w));
}

void Catalog::add_procedure(ProcedureDef def, ProcedureBody body) {
    if (finalized()) fail(ErrorCode::InvalidWorkflow, "catalog is final");
    if (body) bodies_[def.name] = std::move(body);
    procedures_.push_back(std::move(def));
}

void Catalog::add_nested_group(NestedGroup g) {
    if (finalized()) fail(ErrorCode::InvalidWorkflow, "catalog is final");
    groups_.push_back(std::move(g));
}

void Catalog::add_statement_trigger(StatementTrigger t) {
    if (finalized()) fail(ErrorCode::InvalidWorkflow, "catalog is final");
    triggers_.push_back(std::move(t));
}

void Catalog::finalize() {
    if (finalized()) return;

    auto procs = procedures_;
    for (const auto& w : windows_) {
        bool listed = false;
        for (const auto& p : procs)
            for (const auto& d : p.window_defs) listed = listed || d.name == w.spec.name;
        if (listed) continue;
        auto it = std::find_if(procs.begin(), procs.end(), [&](const auto& p) { return p.name == w.spec.owner; });
        if (it == procs.end()) fail(ErrorCode::UnknownProcedure, w.spec.owner + " (owner of window " + w.spec.name + ")");
        it->window_defs.push_back(w.spec);
    }
    for (const auto& p : procs)
        for (const auto& d : p.window_defs) {
            auto it = std::find_if(windows_.begin(), windows_.end(), [&](const auto& w) { return w.spec.name == d.name; });
            if (it == windows_.end()) fail(ErrorCode::UnknownTable, "window " + d.name + " has no schema");
            if (!(it->spec == d)) fail(ErrorCode::InvalidWorkflow, "window " + d.name + " declared twice differently");
        }

    WorkflowDescription desc;
    desc.procedures = procs;
    for (const auto& s : streams_) desc.streams.push_back(s.name);
    for (const auto& t : tables_) desc.tables.push_back(t.name);
    desc.nested_groups = groups_;
    auto wf = std::make_unique<Workflow>(register_workflow(desc));

    std::set<std::string, std::less<>> stream_names, window_names, table_names;
    for (const auto& s : streams_) stream_names.insert(s.name);
    for (const auto& w : windows_) window_names.insert(w.spec.name);
    for (const auto& t : tables_) table_names.insert(t.name);
    auto exists = [&](const std::string& n) {
        return stream_names.count(n) || window_names.count(n) || table_names.count(n);
    };

    // Statement graph: source -> every object its program writes into.
    std::map<std::string, std::set<std::string>> writes;
    for (const auto& t : triggers_) {
        if (!stream_names.count(t.source) && !window_names.count(t.source))
            fail(ErrorCode::UnknownTable, "trigger source " + t.source);
        for (const auto& st : t.program) {
            if (window_names.count(t.source) && !std::holds_alternative<AggregateInsert>(st))
                fail(ErrorCode::InvalidWorkflow, describe(st) + " cannot be attached to window " + t.source);
            std::visit(
                [&](const auto& s) {
                    using S = std::decay_t<decltype(s)>;
                    if constexpr (std::is_same_v<S, FilteredCopy>) {
                        if (s.src != t.source) fail(ErrorCode::InvalidWorkflow, describe(st) + " on " + t.source);
                        if (!exists(s.dst)) fail(ErrorCode::UnknownTable, s.dst);
                        writes[t.source].insert(s.dst);
                    } else if constexpr (std::is_same_v<S, WindowInsertStmt>) {
                        if (s.src != t.source) fail(ErrorCode::InvalidWorkflow, describe(st) + " on " + t.source);
                        if (!window_names.count(s.window)) fail(ErrorCode::UnknownTable, s.window);
                        writes[t.source].insert(s.window);
                    } else if constexpr (std::is_same_v<S, AggregateInsert>) {
                        if (s.window != t.source || !window_names.count(s.window))
                            fail(ErrorCode::InvalidWorkflow, describe(st) + " must be attached to its window");
                        if (!exists(s.dst)) fail(ErrorCode::UnknownTable, s.dst);
                        writes[t.source].insert(s.dst);
                    } else {
                        if (s.src != t.source || !stream_names.count(s.src))
                            fail(ErrorCode::InvalidWorkflow, describe(st) + " on " + t.source);
                    }
                },
                st);
        }
    }
    std::map<std::string, int> mark;
    std::function<void(const std::string&)> visit = [&](const std::string& u) {
        mark[u] = 1;
        for (const auto& v : writes[u]) {
            if (mark[v] == 1) fail(ErrorCode::CycleDetected, "statement triggers form a cycle through " + v);
            if (mark[v] == 0) visit(v);
        }
        mark[u] = 2;
    };
    for (const auto& [src, dsts] : writes)
        if (mark[src] == 0) visit(src);

    workflow_ = std::move(wf);
    for (const auto& t : triggers_) triggers_by_source_[t.source].push_back(&t);
}

void Catalog::require_final() const {
    if (!finalized()) fail(ErrorCode::InvalidWorkflow, "catalog not finalized");
}

const ProcedureBody& Catalog::body(std::string_view procedure) const {
    static const ProcedureBody empty;
    auto it = bodies_.find(procedure);
    return it == bodies_.end() ? empty : it->second;
}

std::vector<ProcedureTrigger> Catalog::procedure_triggers() const {
    require_final();
    std::vector<ProcedureTrigger> out;
    for (const auto& e : workflow_->edges()) out.push_back({e.stream, e.consumer});
    return out;
}

const std::vector<const StatementTrigger*>& Catalog::triggers_on(std::string_view source) const {
    static const std::vector<const StatementTrigger*> none;
    auto it = triggers_by_source_.find(source);
    return it == triggers_by_source_.end() ? none : it->second;
}

bool Catalog::is_external(std::string_view stream) const {
    require_final();
    return workflow_->producer_of(stream).empty();
}

const Schema& Catalog::stream_schema(std::string_view stream) const {
    for (const auto& s : streams_)
        if (s.name == stream) return s.schema;
    fail(ErrorCode::UnknownStream, std::string(stream));
}

Database Catalog::build_database() const {
    require_final();
    Database db;
    for (const auto& t : tables_) db.create_public(t.name, t.schema, t.indexes);
    for (const auto& s : streams_) db.create_stream(s.name, s.schema);
    for (const auto& w : windows_) db.create_window(w.spec, w.schema);
    return db;
}

} // namespace streamtx
