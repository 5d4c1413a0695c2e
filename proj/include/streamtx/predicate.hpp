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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "streamtx/value.hpp"

namespace streamtx {

enum class CmpOp : std::uint8_t { Eq, Ne, Lt, Le, Gt, Ge };

std::string_view to_string(CmpOp op);
std::optional<CmpOp> parse_cmp_op(std::string_view s);

/// Pseudo-columns addressing tuple metadata instead of values.
inline constexpr std::string_view kBatchIdColumn = "$batch_id";
inline constexpr std::string_view kTupleIdColumn = "$tuple_id";
inline constexpr std::string_view kTsColumn = "$ts";

struct Comparison {
    std::string column;
    CmpOp op = CmpOp::Eq;
    Value rhs;
};

/// Conjunction of column comparisons. An empty conjunction matches every row.
struct Predicate {
    std::vector<Comparison> terms;
    bool never = false;

    static Predicate all() { return {}; }
    static Predicate none() {
        Predicate p;
        p.never = true;
        return p;
    }
    static Predicate where(std::string column, CmpOp op, Value rhs) {
        Predicate p;
        p.terms.push_back({std::move(column), op, std::move(rhs)});
        return p;
    }
    Predicate&& and_where(std::string column, CmpOp op, Value rhs) && {
        terms.push_back({std::move(column), op, std::move(rhs)});
        return std::move(*this);
    }

    /// Parses "col op literal [and col op literal ...]", "true" or "false".
    /// Literals: integers, floats (with '.'), or quoted text.
    static Predicate parse(std::string_view text);
    std::string to_string() const;
};

/// A predicate resolved against a schema; evaluation is allocation free.
class BoundPredicate {
public:
    BoundPredicate(const Predicate& p, const Schema& schema);

    bool matches(const Tuple& t) const;

    /// First equality term on an ordinary column, if any (index probe key).
    std::optional<std::pair<std::size_t, const Value*>> equality_probe() const;

private:
    struct Term {
        int column; // >= 0 value index; -1 tuple_id, -2 batch_id, -3 ts
        CmpOp op;
        Value rhs;
    };
    std::vector<Term> terms_;
    bool never_ = false;
};

} // namespace streamtx
