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

#include "streamtx/predicate.hpp"

#include <cctype>
#include <charconv>

#include "streamtx/error.hpp"

namespace streamtx {

std::string_view to_string(CmpOp op) {
    switch (op) {
    case CmpOp::Eq: return "==";
    case CmpOp::Ne: return "!=";
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
    }
    return "?";
}

std::optional<CmpOp> parse_cmp_op(std::string_view s) {
    if (s == "==" || s == "=") return CmpOp::Eq;
    if (s == "!=") return CmpOp::Ne;
    if (s == "<") return CmpOp::Lt;
    if (s == "<=") return CmpOp::Le;
    if (s == ">") return CmpOp::Gt;
    if (s == ">=") return CmpOp::Ge;
    return std::nullopt;
}

namespace {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        if (text[i] == '"') {
            auto end = text.find('"', i + 1);
            if (end == std::string_view::npos) fail(ErrorCode::ConfigError, "unterminated string in predicate");
            out.emplace_back(text.substr(i, end - i + 1));
            i = end + 1;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

Value parse_literal(const std::string& tok) {
    if (tok.size() >= 2 && tok.front() == '"') return tok.substr(1, tok.size() - 2);
    if (tok.find_first_of(".eE") != std::string::npos) return parse_value(tok, ScalarType::Float);
    return parse_value(tok, ScalarType::Int);
}

} // namespace

Predicate Predicate::parse(std::string_view text) {
    auto toks = tokenize(text);
    if (toks.size() == 1 && toks[0] == "true") return all();
    if (toks.size() == 1 && toks[0] == "false") return none();
    Predicate p;
    std::size_t i = 0;
    while (i < toks.size()) {
        if (i + 3 > toks.size()) fail(ErrorCode::ConfigError, "malformed predicate: " + std::string(text));
        auto op = parse_cmp_op(toks[i + 1]);
        if (!op) fail(ErrorCode::ConfigError, "bad comparison operator '" + toks[i + 1] + "'");
        p.terms.push_back({toks[i], *op, parse_literal(toks[i + 2])});
        i += 3;
        if (i < toks.size()) {
            if (toks[i] != "and") fail(ErrorCode::ConfigError, "expected 'and' in predicate");
            ++i;
        }
    }
    return p;
}

std::string Predicate::to_string() const {
    if (never) return "false";
    if (terms.empty()) return "true";
    std::string out;
    for (const auto& t : terms) {
        if (!out.empty()) out += " and ";
        out += t.column;
        out += ' ';
        out += streamtx::to_string(t.op);
        out += ' ';
        if (type_of(t.rhs) == ScalarType::Text)
            out += '"' + std::get<std::string>(t.rhs) + '"';
        else if (type_of(t.rhs) == ScalarType::Float) {
            auto s = streamtx::to_string(t.rhs);
            if (s.find_first_of(".eE") == std::string::npos) s += ".0";
            out += s;
        } else
            out += streamtx::to_string(t.rhs);
    }
    return out;
}

BoundPredicate::BoundPredicate(const Predicate& p, const Schema& schema) : never_(p.never) {
    for (const auto& t : p.terms) {
        int col;
        if (t.column == kTupleIdColumn) col = -1;
        else if (t.column == kBatchIdColumn) col = -2;
        else if (t.column == kTsColumn) col = -3;
        else {
            col = static_cast<int>(schema.require(t.column));
            auto ct = schema.columns()[static_cast<std::size_t>(col)].type;
            bool numeric_ok = ct != ScalarType::Text && type_of(t.rhs) != ScalarType::Text;
            if (!numeric_ok && ct != type_of(t.rhs))
                fail(ErrorCode::TypeMismatch, "predicate on '" + t.column + "' compares incompatible types");
        }
        if (col < 0 && type_of(t.rhs) == ScalarType::Text)
            fail(ErrorCode::TypeMismatch, "metadata column compared with text");
        terms_.push_back({col, t.op, t.rhs});
    }
}

namespace {

bool apply(CmpOp op, std::partial_ordering c) {
    switch (op) {
    case CmpOp::Eq: return c == 0;
    case CmpOp::Ne: return c != 0;
    case CmpOp::Lt: return c < 0;
    case CmpOp::Le: return c <= 0;
    case CmpOp::Gt: return c > 0;
    case CmpOp::Ge: return c >= 0;
    }
    return false;
}

} // namespace

bool BoundPredicate::matches(const Tuple& t) const {
    if (never_) return false;
    for (const auto& term : terms_) {
        std::optional<std::partial_ordering> c;
        if (term.column >= 0) {
            c = compare_values(t.values[static_cast<std::size_t>(term.column)], term.rhs);
        } else {
            std::int64_t meta = term.column == -1   ? static_cast<std::int64_t>(t.meta.tuple_id)
                                : term.column == -2 ? static_cast<std::int64_t>(t.meta.batch_id)
                                                    : t.meta.ts;
            c = compare_values(Value{meta}, term.rhs);
        }
        if (!c || !apply(term.op, *c)) return false;
    }
    return true;
}

std::optional<std::pair<std::size_t, const Value*>> BoundPredicate::equality_probe() const {
    if (never_) return std::nullopt;
    for (const auto& term : terms_)
        if (term.column >= 0 && term.op == CmpOp::Eq)
            return std::make_pair(static_cast<std::size_t>(term.column), &term.rhs);
    return std::nullopt;
}

} // namespace streamtx
