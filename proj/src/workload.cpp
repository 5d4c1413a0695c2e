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

#include "streamtx/workload.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "streamtx/context.hpp"
#include "streamtx/error.hpp"
#include "streamtx/ingest.hpp"

namespace streamtx {

std::string_view to_string(EngineMode m) { return m == EngineMode::Triggered ? "triggered" : "client_driven"; }

EngineMode parse_engine_mode(std::string_view s) {
    if (s == "triggered") return EngineMode::Triggered;
    if (s == "client_driven") return EngineMode::ClientDriven;
    fail(ErrorCode::ConfigError, "unknown engine mode " + std::string(s));
}

Schema parse_schema(const std::vector<std::string>& columns) {
    std::vector<Column> cols;
    for (const auto& c : columns) {
        auto colon = c.find(':');
        if (colon == std::string::npos || colon == 0) fail(ErrorCode::ConfigError, "column '" + c + "' is not name:type");
        auto t = parse_scalar_type(std::string_view(c).substr(colon + 1));
        if (!t) fail(ErrorCode::ConfigError, "unknown column type in '" + c + "'");
        cols.push_back({c.substr(0, colon), *t});
    }
    return Schema(std::move(cols));
}

std::vector<std::string> format_schema(const Schema& s) {
    std::vector<std::string> out;
    for (const auto& c : s.columns()) out.push_back(c.name + ":" + std::string(to_string(c.type)));
    return out;
}

// ---------------------------------------------------------------------------
// Statement and operation text

namespace {

std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

/// Splits "HEAD where PRED" at the first standalone "where".
std::pair<std::string, std::optional<Predicate>> split_where(std::string_view text) {
    auto ws = words(text);
    std::size_t pos = 0;
    for (const auto& w : ws) {
        pos = text.find(w, pos);
        if (w == "where") {
            auto head = std::string(text.substr(0, pos));
            return {head, Predicate::parse(text.substr(pos + 5))};
        }
        pos += w.size();
    }
    return {std::string(text), std::nullopt};
}

[[noreturn]] void bad(std::string_view text, const std::string& why) {
    fail(ErrorCode::ConfigError, "'" + std::string(text) + "': " + why);
}

void expect_arrow(std::string_view text, const std::vector<std::string>& w, std::size_t i) {
    if (w.size() <= i || w[i] != "->") bad(text, "expected '->'");
}

/// "sum(v)" -> (Sum, "v").
std::pair<AggOp, std::string> parse_agg(std::string_view text, const std::string& spec) {
    auto open = spec.find('(');
    if (open == std::string::npos || spec.back() != ')') bad(text, "expected OP(COL)");
    auto op = parse_agg_op(std::string_view(spec).substr(0, open));
    if (!op) bad(text, "unknown aggregate " + spec.substr(0, open));
    return {*op, spec.substr(open + 1, spec.size() - open - 2)};
}

struct AggParts {
    std::string src;
    AggOp op;
    std::string column;
    std::optional<std::string> by;
    std::string dst;
};

/// Parses "SRC OP(COL) [by COL] -> DST" starting at w[1].
AggParts parse_agg_tail(std::string_view text, const std::vector<std::string>& w) {
    if (w.size() < 5) bad(text, "expected SRC OP(COL) [by COL] -> DST");
    AggParts a;
    a.src = w[1];
    std::tie(a.op, a.column) = parse_agg(text, w[2]);
    std::size_t i = 3;
    if (w[i] == "by") {
        if (w.size() < 7) bad(text, "expected a group-by column");
        a.by = w[4];
        i = 5;
    }
    expect_arrow(text, w, i);
    if (w.size() != i + 2) bad(text, "trailing words");
    a.dst = w[i + 1];
    return a;
}

} // namespace

Statement parse_statement(std::string_view text) {
    auto [head, pred] = split_where(text);
    auto w = words(head);
    if (w.empty()) bad(text, "empty statement");
    if (w[0] == "filtered_copy") {
        if (w.size() != 4) bad(text, "expected filtered_copy SRC -> DST [where PRED]");
        expect_arrow(text, w, 2);
        return FilteredCopy{w[1], w[3], pred.value_or(Predicate::all())};
    }
    if (pred) bad(text, "only filtered_copy takes a where clause");
    if (w[0] == "window_insert") {
        if (w.size() != 4) bad(text, "expected window_insert SRC -> WINDOW");
        expect_arrow(text, w, 2);
        return WindowInsertStmt{w[1], w[3]};
    }
    if (w[0] == "aggregate_insert") {
        // aggregate_insert W -> DST OP(COL) [by COL]
        if (w.size() != 5 && w.size() != 7) bad(text, "expected aggregate_insert WINDOW -> DST OP(COL) [by COL]");
        expect_arrow(text, w, 2);
        auto [op, col] = parse_agg(text, w[4]);
        AggregateInsert a{w[1], w[3], op, col, std::nullopt};
        if (w.size() == 7) {
            if (w[5] != "by") bad(text, "expected 'by'");
            a.group_by = w[6];
        }
        return a;
    }
    if (w[0] == "delete_batch") {
        if (w.size() != 2) bad(text, "expected delete_batch SRC");
        return DeleteBatch{w[1]};
    }
    bad(text, "unknown statement " + w[0]);
}

// ---------------------------------------------------------------------------
// Body operations

namespace {

struct Op {
    enum class Kind { Copy, Delete, AbortIf, InsertArgs, Aggregate, AggregateEvents, EmulateWindow, Query };
    Kind kind;
    std::string text;
    std::string src;
    std::string dst;
    std::string meta;
    Predicate pred;
    AggOp agg = AggOp::Count;
    std::string column;
    std::optional<std::string> by;
    std::uint64_t size = 0;
    std::uint64_t slide = 0;
};

Op parse_op(const std::string& text) {
    auto [head, pred] = split_where(text);
    auto w = words(head);
    if (w.empty()) bad(text, "empty operation");
    Op op;
    op.text = text;
    op.pred = pred.value_or(Predicate::all());
    const auto& verb = w[0];
    auto no_where = [&] {
        if (pred) bad(text, verb + " takes no where clause");
    };
    if (verb == "copy") {
        if (w.size() != 4) bad(text, "expected copy SRC -> DST [where PRED]");
        expect_arrow(text, w, 2);
        op.kind = Op::Kind::Copy;
        op.src = w[1];
        op.dst = w[3];
    } else if (verb == "delete" || verb == "abort_if" || verb == "query") {
        if (w.size() != 2) bad(text, "expected " + verb + " NAME [where PRED]");
        op.kind = verb == "delete" ? Op::Kind::Delete : verb == "query" ? Op::Kind::Query : Op::Kind::AbortIf;
        op.src = w[1];
    } else if (verb == "insert_args") {
        no_where();
        if (w.size() != 2) bad(text, "expected insert_args TABLE");
        op.kind = Op::Kind::InsertArgs;
        op.dst = w[1];
    } else if (verb == "aggregate" || verb == "aggregate_events") {
        no_where();
        auto a = parse_agg_tail(text, w);
        op.kind = verb == "aggregate" ? Op::Kind::Aggregate : Op::Kind::AggregateEvents;
        op.src = a.src;
        op.agg = a.op;
        op.column = a.column;
        op.by = a.by;
        op.dst = a.dst;
    } else if (verb == "emulate_window") {
        no_where();
        if (w.size() != 7) bad(text, "expected emulate_window SRC -> ROWS META SIZE SLIDE");
        expect_arrow(text, w, 2);
        op.kind = Op::Kind::EmulateWindow;
        op.src = w[1];
        op.dst = w[3];
        op.meta = w[4];
        try {
            op.size = std::stoull(w[5]);
            op.slide = std::stoull(w[6]);
        } catch (const std::exception&) {
            bad(text, "SIZE and SLIDE must be integers");
        }
        if (op.slide < 1 || op.slide > op.size) bad(text, "needs 1 <= SLIDE <= SIZE");
    } else {
        bad(text, "unknown operation " + verb);
    }
    return op;
}

struct RecordedEvent {
    const Schema* schema;
    std::vector<Tuple> contents;
};

class BodyRun {
public:
    BodyRun(ProcContext& ctx) : ctx_(ctx) {}

    void run(const Op& op) {
        switch (op.kind) {
        case Op::Kind::Copy: copy(op); break;
        case Op::Kind::Delete: ctx_.erase(op.src, op.pred); break;
        case Op::Kind::AbortIf:
            if (!read(op.src, op.pred).empty()) ctx_.abort(op.text);
            break;
        case Op::Kind::InsertArgs: ctx_.insert(op.dst, ctx_.values()); break;
        case Op::Kind::Aggregate: aggregate(op); break;
        case Op::Kind::AggregateEvents: {
            auto it = events_.find(op.src);
            if (it == events_.end()) break;
            for (const auto& ev : it->second)
                write(op.dst, aggregate_rows(ev.contents, *ev.schema, op.agg, op.column, op.by));
            break;
        }
        case Op::Kind::EmulateWindow: emulate_window(op); break;
        case Op::Kind::Query: {
            std::vector<std::vector<Value>> rows;
            for (auto& t : ctx_.select(op.src, op.pred)) rows.push_back(std::move(t.values));
            ctx_.set_result(std::move(rows));
            break;
        }
        }
    }

private:
    bool is_input(std::string_view name) const {
        const auto& ins = ctx_.definition().stream_inputs;
        return std::find(ins.begin(), ins.end(), name) != ins.end();
    }

    std::vector<Tuple> read(const std::string& src, const Predicate& p) {
        if (!is_input(src)) return ctx_.select(src, p);
        const auto& batch = ctx_.input(src);
        BoundPredicate bp(p, ctx_.schema_of(src));
        std::vector<Tuple> out;
        for (const auto& t : batch)
            if (bp.matches(t)) out.push_back(t);
        return out;
    }

    void write(const std::string& dst, std::vector<std::vector<Value>> rows) {
        if (rows.empty()) return;
        switch (ctx_.kind_of(dst)) {
        case TableKind::Stream: ctx_.emit(dst, std::move(rows)); break;
        case TableKind::Window: {
            std::vector<Tuple> ts;
            for (auto& r : rows) ts.push_back(Tuple{std::move(r), {0, ctx_.round(), 0}});
            record(dst, ctx_.window_insert(dst, ts));
            break;
        }
        default:
            for (auto& r : rows) ctx_.insert(dst, std::move(r));
        }
    }

    void record(const std::string& name, const std::vector<FullWindowEvent>& evs) {
        const Schema& s = ctx_.schema_of(name);
        for (const auto& e : evs) events_[name].push_back({&s, e.contents});
    }

    void copy(const Op& op) {
        auto rows = read(op.src, op.pred);
        if (rows.empty()) return;
        auto kind = ctx_.kind_of(op.dst);
        if (kind == TableKind::Window) {
            record(op.dst, ctx_.window_insert(op.dst, rows));
        } else if (kind == TableKind::Stream) {
            std::vector<std::vector<Value>> vals;
            for (auto& t : rows) vals.push_back(std::move(t.values));
            ctx_.emit(op.dst, std::move(vals), rows.front().meta.ts);
        } else {
            for (auto& t : rows) ctx_.insert(op.dst, std::move(t.values), t.meta.ts);
        }
    }

    void aggregate(const Op& op) {
        if (is_input(op.src)) {
            const auto& batch = ctx_.input(op.src);
            write(op.dst, aggregate_rows(batch, ctx_.schema_of(op.src), op.agg, op.column, op.by));
        } else {
            write(op.dst, ctx_.aggregate(op.src, op.agg, op.column, op.by));
        }
    }

    // The naive baseline: window rows carry (pos, staged) in an ordinary
    // table, the window's progress lives in a metadata table, and every slide
    // is explicit delete/insert statements.
    void emulate_window(const Op& op) {
        const Schema& src_schema = ctx_.schema_of(op.src);
        const Schema& rows_schema = ctx_.schema_of(op.dst);
        const std::size_t arity = src_schema.arity();
        const std::size_t pos_col = rows_schema.require("pos");
        const std::size_t staged_col = rows_schema.require("staged");

        std::int64_t next_pos = 1;
        std::int64_t full = 0;
        auto meta = ctx_.select(op.meta);
        if (!meta.empty()) {
            next_pos = std::get<std::int64_t>(meta.front().values.at(0));
            full = std::get<std::int64_t>(meta.front().values.at(1));
        }
        for (const auto& t : read(op.src, Predicate::all())) {
            auto v = t.values;
            v.push_back(next_pos++);
            v.push_back(std::int64_t{1});
            ctx_.insert(op.dst, std::move(v), t.meta.ts);
        }

        auto by_pos = [&](std::vector<Tuple> rows) {
            std::sort(rows.begin(), rows.end(), [&](const Tuple& a, const Tuple& b) {
                return std::get<std::int64_t>(a.values[pos_col]) < std::get<std::int64_t>(b.values[pos_col]);
            });
            return rows;
        };
        auto at_pos = [&](const Tuple& t) {
            return Predicate::where("pos", CmpOp::Eq, t.values[pos_col]);
        };
        auto activate = [&](const Tuple& t) {
            ctx_.erase(op.dst, at_pos(t));
            auto v = t.values;
            v[staged_col] = std::int64_t{0};
            ctx_.insert(op.dst, std::move(v), t.meta.ts);
        };

        for (;;) {
            auto staged = by_pos(ctx_.select(op.dst, Predicate::where("staged", CmpOp::Eq, std::int64_t{1})));
            auto active = by_pos(ctx_.select(op.dst, Predicate::where("staged", CmpOp::Eq, std::int64_t{0})));
            if (!full) {
                if (active.size() + staged.size() < op.size) break;
                for (std::size_t i = 0; active.size() + i < op.size; ++i) activate(staged[i]);
                full = 1;
            } else {
                if (staged.size() < op.slide) break;
                for (std::size_t i = 0; i < op.slide; ++i) ctx_.erase(op.dst, at_pos(active[i]));
                for (std::size_t i = 0; i < op.slide; ++i) activate(staged[i]);
            }
            auto now = by_pos(ctx_.select(op.dst, Predicate::where("staged", CmpOp::Eq, std::int64_t{0})));
            RecordedEvent ev{&src_schema, {}};
            for (auto& t : now) {
                t.values.resize(arity);
                ev.contents.push_back(std::move(t));
            }
            events_[op.dst].push_back(std::move(ev));
        }
        ctx_.erase(op.meta, Predicate::all());
        ctx_.insert(op.meta, {next_pos, full});
    }

    ProcContext& ctx_;
    std::map<std::string, std::vector<RecordedEvent>, std::less<>> events_;
};

} // namespace

ProcedureBody compile_body(const std::vector<std::string>& ops) {
    auto program = std::make_shared<std::vector<Op>>();
    for (const auto& text : ops) program->push_back(parse_op(text));
    return [program](ProcContext& ctx) {
        BodyRun run(ctx);
        for (const auto& op : *program) run.run(op);
    };
}

// ---------------------------------------------------------------------------
// Config loading

namespace {

ProcedureKind parse_kind(const ConfigSection& s) {
    auto k = s.get_string("kind", "");
    if (k == "oltp") return ProcedureKind::Oltp;
    if (k == "border") return ProcedureKind::Border;
    if (k == "interior") return ProcedureKind::Interior;
    fail(ErrorCode::ConfigError, "[procedure " + s.name + "] kind must be oltp, border or interior");
}

std::uint64_t non_negative(const ConfigSection& s, std::string_view key, std::int64_t dflt) {
    auto v = s.get_int(key, dflt);
    if (v < 0) fail(ErrorCode::ConfigError, "[" + s.kind + "] " + std::string(key) + " must be >= 0");
    return static_cast<std::uint64_t>(v);
}

void require_name(const ConfigSection& s) {
    if (s.name.empty()) fail(ErrorCode::ConfigError, "[" + s.kind + "] section needs a name (line " + std::to_string(s.line) + ")");
}

} // namespace

WorkloadConfig load_workload(const ConfigDoc& doc) {
    WorkloadConfig wc;
    auto cat = std::make_shared<Catalog>();
    int engines = 0, benches = 0;
    for (const auto& s : doc.sections) {
        if (s.kind == "engine") {
            if (++engines > 1) fail(ErrorCode::ConfigError, "more than one [engine] section");
            s.allow_only({"mode", "recovery", "dir", "group_commit_batch", "group_commit_delay_us", "sync",
                          "partitions", "partition_key", "queue_bound", "checkpoint_every"});
            auto& e = wc.engine;
            e.mode = parse_engine_mode(s.get_string("mode", "triggered"));
            auto rm = parse_recovery_mode(s.get_string("recovery", "none"));
            if (!rm) fail(ErrorCode::ConfigError, "[engine] recovery must be none, strong or weak");
            e.recovery = *rm;
            e.dir = s.get_string("dir", e.dir.string());
            e.group_commit_batch = std::max<std::uint64_t>(1, non_negative(s, "group_commit_batch", 1));
            e.group_commit_delay = std::chrono::microseconds(non_negative(s, "group_commit_delay_us", 0));
            e.sync = s.get_bool("sync", true);
            e.partitions = static_cast<std::uint32_t>(std::max<std::uint64_t>(1, non_negative(s, "partitions", 1)));
            e.partition_key = s.get_string("partition_key", "");
            e.queue_bound = non_negative(s, "queue_bound", 0);
            e.checkpoint_every = non_negative(s, "checkpoint_every", 0);
        } else if (s.kind == "stream") {
            require_name(s);
            s.allow_only({"schema"});
            cat->add_stream({s.name, parse_schema(s.get_strings("schema"))});
        } else if (s.kind == "table") {
            require_name(s);
            s.allow_only({"schema", "indexes"});
            cat->add_table({s.name, parse_schema(s.get_strings("schema")), s.get_strings("indexes")});
        } else if (s.kind == "window") {
            require_name(s);
            s.allow_only({"schema", "size", "slide", "owner"});
            WindowSpec spec{s.name, non_negative(s, "size", 1), non_negative(s, "slide", 1), s.get_string("owner", "")};
            cat->add_window({spec, parse_schema(s.get_strings("schema"))});
        } else if (s.kind == "procedure") {
            require_name(s);
            s.allow_only({"kind", "inputs", "outputs", "tables", "body"});
            ProcedureDef def;
            def.name = s.name;
            def.kind = parse_kind(s);
            def.stream_inputs = s.get_strings("inputs");
            def.stream_outputs = s.get_strings("outputs");
            def.table_inputs = s.get_strings("tables");
            auto ops = s.get_strings("body");
            cat->add_procedure(std::move(def), ops.empty() ? ProcedureBody{} : compile_body(ops));
        } else if (s.kind == "group") {
            require_name(s);
            s.allow_only({"children", "order"});
            NestedGroup g;
            g.parent_name = s.name;
            g.children = s.get_strings("children");
            for (const auto& o : s.get_strings("order")) {
                auto lt = o.find('<');
                if (lt == std::string::npos) fail(ErrorCode::ConfigError, "[group " + s.name + "] order entry '" + o + "' is not a<b");
                g.partial_order.emplace_back(o.substr(0, lt), o.substr(lt + 1));
            }
            cat->add_nested_group(std::move(g));
        } else if (s.kind == "trigger") {
            require_name(s);
            s.allow_only({"program"});
            StatementTrigger t;
            t.source = s.name;
            for (const auto& st : s.get_strings("program")) t.program.push_back(parse_statement(st));
            cat->add_statement_trigger(std::move(t));
        } else if (s.kind == "feed") {
            require_name(s);
            s.allow_only({"stream", "file", "tuples", "seed", "min_value", "max_value", "batch_size", "batch_by_ts",
                          "rate"});
            FeedSpec f;
            f.name = s.name;
            f.stream = s.get_string("stream", "");
            f.file = s.get_string("file", "");
            f.tuples = non_negative(s, "tuples", 0);
            f.seed = non_negative(s, "seed", 1);
            f.min_value = s.get_int("min_value", 0);
            f.max_value = s.get_int("max_value", 999);
            f.batch_size = std::max<std::uint64_t>(1, non_negative(s, "batch_size", 1));
            f.batch_by_ts = s.get_bool("batch_by_ts", false);
            f.rate = s.get_double("rate", 0);
            if (f.max_value < f.min_value) fail(ErrorCode::ConfigError, "[feed " + s.name + "] max_value < min_value");
            wc.feeds.push_back(std::move(f));
        } else if (s.kind == "bench") {
            if (++benches > 1) fail(ErrorCode::ConfigError, "more than one [bench] section");
            wc.bench = s;
        } else {
            fail(ErrorCode::ConfigError, "unknown section kind [" + s.kind + "] (line " + std::to_string(s.line) + ")");
        }
    }
    cat->finalize();
    for (const auto& f : wc.feeds)
        if (!cat->is_external(f.stream))
            fail(ErrorCode::ConfigError, "[feed " + f.name + "] stream " + f.stream + " is not an external stream");
    if (wc.engine.partitions > 1) {
        if (!cat->partitionable()) fail(ErrorCode::NotPartitionable, "the workload declares public tables");
        if (wc.engine.partition_key.empty()) fail(ErrorCode::ConfigError, "[engine] partitions > 1 needs partition_key");
    }
    wc.catalog = std::move(cat);
    return wc;
}

PartitionOptions partition_options(const EngineConfig& e, std::uint32_t id, const std::filesystem::path& dir) {
    PartitionOptions o;
    o.id = id;
    o.mode = e.recovery;
    o.dir = dir;
    o.group_commit.max_batch = e.group_commit_batch;
    o.group_commit.max_delay = e.group_commit_delay;
    o.sync = e.sync;
    o.queue_bound = e.queue_bound;
    return o;
}

std::vector<Tuple> generate_feed(const FeedSpec& f, const Schema& schema) {
    std::mt19937_64 rng(f.seed);
    std::uniform_int_distribution<std::int64_t> ints(f.min_value, f.max_value);
    std::uniform_real_distribution<double> reals(static_cast<double>(f.min_value), static_cast<double>(f.max_value));
    std::vector<Tuple> out;
    out.reserve(f.tuples);
    for (std::uint64_t i = 0; i < f.tuples; ++i) {
        Tuple t;
        for (const auto& c : schema.columns()) {
            switch (c.type) {
            case ScalarType::Int: t.values.emplace_back(ints(rng)); break;
            case ScalarType::Float: t.values.emplace_back(reals(rng)); break;
            case ScalarType::Text: t.values.emplace_back("t" + std::to_string(ints(rng))); break;
            }
        }
        t.meta.ts = static_cast<std::int64_t>(i + 1);
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<Tuple> load_feed(const FeedSpec& f, const Schema& schema) {
    return f.file.empty() ? generate_feed(f, schema) : read_csv_feed(f.file, schema);
}

// ---------------------------------------------------------------------------
// Built-in workloads

namespace {

using Strings = ConfigValue::List;

Strings strs(std::initializer_list<std::string> xs) {
    Strings out;
    for (const auto& x : xs) out.emplace_back(x);
    return out;
}

Strings strs(const std::vector<std::string>& xs) {
    Strings out;
    for (const auto& x : xs) out.emplace_back(x);
    return out;
}

void engine_section(ConfigDoc& doc, EngineMode mode) { doc.add("engine").set("mode", std::string(to_string(mode))); }

void stream(ConfigDoc& doc, const std::string& name, std::initializer_list<std::string> schema) {
    doc.add("stream", name).set("schema", strs(schema));
}

void table(ConfigDoc& doc, const std::string& name, std::initializer_list<std::string> schema,
           std::initializer_list<std::string> indexes = {}) {
    auto& t = doc.add("table", name);
    t.set("schema", strs(schema));
    if (indexes.size()) t.set("indexes", strs(indexes));
}

void procedure(ConfigDoc& doc, const std::string& name, std::string_view kind, const std::vector<std::string>& inputs,
               const std::vector<std::string>& outputs, const std::vector<std::string>& tables,
               const std::vector<std::string>& body) {
    auto& p = doc.add("procedure", name);
    p.set("kind", std::string(kind));
    p.set("inputs", strs(inputs));
    if (!outputs.empty()) p.set("outputs", strs(outputs));
    if (!tables.empty()) p.set("tables", strs(tables));
    if (!body.empty()) p.set("body", strs(body));
}

} // namespace

ConfigDoc ee_chain_doc(std::size_t k, EngineMode mode) {
    if (k < 1 || k > 20) fail(ErrorCode::ConfigError, "EE chain needs 1 <= k <= 20");
    ConfigDoc doc;
    engine_section(doc, mode);
    stream(doc, "ee_in", {"v:int"});
    table(doc, "ee_out", {"v:int"});
    auto hop = [](std::size_t i, std::size_t k, const char* prefix) {
        return i == 0 ? std::string("ee_in") : i == k ? std::string("ee_out") : prefix + std::to_string(i);
    };
    const std::string filter = " where v >= 0";
    if (mode == EngineMode::Triggered) {
        for (std::size_t i = 1; i < k; ++i) stream(doc, hop(i, k, "ee_s"), {"v:int"});
        procedure(doc, "ee_entry", "border", {"ee_in"}, {}, {"ee_out"}, {});
        for (std::size_t i = 0; i < k; ++i)
            doc.add("trigger", hop(i, k, "ee_s"))
                .set("program", strs({"filtered_copy " + hop(i, k, "ee_s") + " -> " + hop(i + 1, k, "ee_s") + filter}));
    } else {
        for (std::size_t i = 1; i < k; ++i) stream(doc, hop(i, k, "ee_c"), {"v:int"});
        for (std::size_t i = 1; i <= k; ++i) {
            auto in = hop(i - 1, k, "ee_c"), out = hop(i, k, "ee_c");
            procedure(doc, "ee_p" + std::to_string(i), i == 1 ? "border" : "interior", {in},
                      i == k ? std::vector<std::string>{} : std::vector<std::string>{out},
                      i == k ? std::vector<std::string>{"ee_out"} : std::vector<std::string>{},
                      {"copy " + in + " -> " + out + filter});
        }
    }
    return doc;
}

ConfigDoc pe_chain_doc(std::size_t n) {
    if (n < 1 || n > 10) fail(ErrorCode::ConfigError, "PE chain needs 1 <= n <= 10");
    ConfigDoc doc;
    engine_section(doc, EngineMode::Triggered);
    stream(doc, "pe_in", {"v:int"});
    for (std::size_t i = 1; i < n; ++i) stream(doc, "pe_s" + std::to_string(i), {"v:int"});
    table(doc, "pe_out", {"v:int"});
    table(doc, "pe_sums", {"s:int"});
    for (std::size_t i = 1; i <= n; ++i) {
        auto in = i == 1 ? std::string("pe_in") : "pe_s" + std::to_string(i - 1);
        auto out = i == n ? std::string("pe_out") : "pe_s" + std::to_string(i);
        std::vector<std::string> tables{"pe_sums"};
        if (i == n) tables.push_back("pe_out");
        procedure(doc, "pe_p" + std::to_string(i), i == 1 ? "border" : "interior", {in},
                  i == n ? std::vector<std::string>{} : std::vector<std::string>{out}, tables,
                  {"copy " + in + " -> " + out, "aggregate " + in + " sum(v) -> pe_sums"});
    }
    return doc;
}

ConfigDoc window_doc(std::size_t size, std::size_t slide, EngineMode mode) {
    if (slide < 1 || slide > size) fail(ErrorCode::ConfigError, "window needs 1 <= slide <= size");
    ConfigDoc doc;
    engine_section(doc, mode);
    stream(doc, "win_in", {"v:int"});
    table(doc, "win_count", {"c:int"});
    table(doc, "win_sum", {"s:int"});
    std::vector<std::string> body;
    std::string events;
    std::vector<std::string> tables{"win_count", "win_sum"};
    if (mode == EngineMode::Triggered) {
        auto& w = doc.add("window", "win_w");
        w.set("schema", strs({"v:int"}));
        w.set("size", static_cast<std::int64_t>(size));
        w.set("slide", static_cast<std::int64_t>(slide));
        w.set("owner", "win_sp");
        body.push_back("copy win_in -> win_w");
        events = "win_w";
    } else {
        table(doc, "win_rows", {"v:int", "pos:int", "staged:int"}, {"pos", "staged"});
        table(doc, "win_meta", {"next_pos:int", "full:int"});
        tables.insert(tables.end(), {"win_rows", "win_meta"});
        body.push_back("emulate_window win_in -> win_rows win_meta " + std::to_string(size) + " " +
                       std::to_string(slide));
        events = "win_rows";
    }
    body.push_back("aggregate_events " + events + " count(v) -> win_count");
    body.push_back("aggregate_events " + events + " sum(v) -> win_sum");
    procedure(doc, "win_sp", "border", {"win_in"}, {}, tables, body);
    return doc;
}

ConfigDoc scaling_doc(std::size_t stages) {
    if (stages < 1) fail(ErrorCode::ConfigError, "scaling workload needs >= 1 stage");
    ConfigDoc doc;
    auto& e = doc.add("engine");
    e.set("mode", "triggered");
    e.set("partition_key", "k");
    stream(doc, "sc_in", {"k:int", "v:int"});
    for (std::size_t i = 1; i < stages; ++i) stream(doc, "sc_s" + std::to_string(i), {"k:int", "v:int"});
    stream(doc, "sc_out", {"k:int", "v:int"});
    for (std::size_t i = 1; i <= stages; ++i) {
        auto in = i == 1 ? std::string("sc_in") : "sc_s" + std::to_string(i - 1);
        auto out = i == stages ? std::string("sc_out") : "sc_s" + std::to_string(i);
        procedure(doc, "sc_p" + std::to_string(i), i == 1 ? "border" : "interior", {in}, {out}, {},
                  {"copy " + in + " -> " + out});
    }
    return doc;
}

ConfigDoc random_workflow_doc(std::mt19937_64& rng, const RandomWorkflowOptions& opts) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    const std::size_t n = pick(1, std::max<std::size_t>(1, opts.max_procedures));

    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("t" + std::to_string(i + 1));
    std::vector<std::vector<std::string>> ins(n), outs(n);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (coin(rng) < opts.edge_probability) {
                auto s = "s_" + names[i] + "_" + names[j];
                outs[i].push_back(s);
                ins[j].push_back(s);
                edges.emplace_back(i, j);
            }

    ConfigDoc doc;
    engine_section(doc, EngineMode::Triggered);
    std::vector<std::string> externals;
    for (std::size_t i = 0; i < n; ++i)
        if (ins[i].empty()) {
            ins[i].push_back("x_" + names[i]);
            externals.push_back(ins[i].back());
        }
    for (const auto& x : externals) stream(doc, x, {"k:int", "v:int"});
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& s : outs[i]) stream(doc, s, {"k:int", "v:int"});
    table(doc, "acc", {"s:int"});

    for (std::size_t i = 0; i < n; ++i) {
        bool border = ins[i].front().starts_with("x_");
        std::vector<std::string> body;
        if (coin(rng) < opts.abort_probability)
            body.push_back("abort_if " + ins[i].front() + " where v = " + std::to_string(pick(0, 9)));
        for (const auto& in : ins[i]) body.push_back("aggregate " + in + " sum(v) -> acc");
        for (const auto& out : outs[i]) {
            auto op = "copy " + ins[i].front() + " -> " + out;
            if (coin(rng) < opts.filter_probability) op += " where v > " + std::to_string(pick(0, 9));
            body.push_back(op);
        }
        procedure(doc, names[i], border ? "border" : "interior", ins[i], outs[i], {"acc"}, body);
    }
    if (opts.oltp) {
        procedure(doc, "oltp_read", "oltp", {}, {}, {"acc"}, {"query acc"});
        procedure(doc, "oltp_write", "oltp", {}, {}, {"acc"}, {"insert_args acc"});
    }

    // A two-child group (u, v) is legal when every input of v comes from u.
    if (coin(rng) < opts.group_probability) {
        std::vector<std::pair<std::size_t, std::size_t>> ok;
        for (auto [u, v] : edges) {
            bool only_u = std::all_of(ins[v].begin(), ins[v].end(),
                                      [&](const std::string& s) { return s.starts_with("s_" + names[u] + "_"); });
            if (only_u) ok.emplace_back(u, v);
        }
        if (!ok.empty()) {
            auto [u, v] = ok[pick(0, ok.size() - 1)];
            auto& g = doc.add("group", "g_" + names[u] + "_" + names[v]);
            g.set("children", strs({names[u], names[v]}));
            g.set("order", strs({names[u] + "<" + names[v]}));
        }
    }
    return doc;
}

} // namespace streamtx
