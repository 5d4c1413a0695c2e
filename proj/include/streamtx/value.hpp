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

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace streamtx {

using Round = std::uint64_t;
using BatchId = std::uint64_t;
using TupleId = std::uint64_t;
using CommitSeq = std::uint64_t;

/// Longest text value a column may hold.
inline constexpr std::size_t kMaxTextBytes = 64;

enum class ScalarType : std::uint8_t { Int = 0, Float = 1, Text = 2 };

using Value = std::variant<std::int64_t, double, std::string>;

ScalarType type_of(const Value& v);
std::string_view to_string(ScalarType t);
std::optional<ScalarType> parse_scalar_type(std::string_view s);
std::string to_string(const Value& v);

/// Numeric values compare across int/float; text only against text.
/// Returns nullopt when the two values are not comparable.
std::optional<std::partial_ordering> compare_values(const Value& a, const Value& b);

/// Parses a literal the way config files and CSV feeds spell it.
Value parse_value(std::string_view text, ScalarType type);

struct Column {
    std::string name;
    ScalarType type = ScalarType::Int;

    bool operator==(const Column&) const = default;
};

class Schema {
public:
    Schema() = default;
    explicit Schema(std::vector<Column> columns) : columns_(std::move(columns)) {}

    const std::vector<Column>& columns() const { return columns_; }
    std::size_t arity() const { return columns_.size(); }
    std::optional<std::size_t> index_of(std::string_view name) const;
    std::size_t require(std::string_view name) const;

    /// Throws TypeMismatch unless `values` matches arity and column types.
    void check(const std::vector<Value>& values) const;

    bool operator==(const Schema&) const = default;

private:
    std::vector<Column> columns_;
};

struct TupleMeta {
    TupleId tuple_id = 0;
    BatchId batch_id = 0;
    std::int64_t ts = 0;

    bool operator==(const TupleMeta&) const = default;
};

struct Tuple {
    std::vector<Value> values;
    TupleMeta meta;

    bool operator==(const Tuple&) const = default;
};

struct AtomicBatch {
    BatchId batch_id = 0;
    std::vector<Tuple> tuples;

    bool operator==(const AtomicBatch&) const = default;
};

} // namespace streamtx
