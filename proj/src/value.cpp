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

#include "streamtx/value.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "streamtx/error.hpp"

namespace streamtx {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::UnknownStream: return "UnknownStream";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::WindowOwnedByTwoProcedures: return "WindowOwnedByTwoProcedures";
    case ErrorCode::InvalidWorkflow: return "InvalidWorkflow";
    case ErrorCode::UnknownTable: return "UnknownTable";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::WindowScopeViolation: return "WindowScopeViolation";
    case ErrorCode::CorruptSnapshot: return "CorruptSnapshot";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::UnknownProcedure: return "UnknownProcedure";
    case ErrorCode::WrongKind: return "WrongKind";
    case ErrorCode::BodyAbort: return "BodyAbort";
    case ErrorCode::MissingInputBatch: return "MissingInputBatch";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::NotPartitionable: return "NotPartitionable";
    case ErrorCode::LogWriteFailure: return "LogWriteFailure";
    case ErrorCode::CorruptLogRecord: return "CorruptLogRecord";
    case ErrorCode::ReplayDivergence: return "ReplayDivergence";
    case ErrorCode::IOFailure: return "IOFailure";
    case ErrorCode::UnknownProcedureInSchedule: return "UnknownProcedureInSchedule";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::EngineStopped: return "EngineStopped";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

ScalarType type_of(const Value& v) { return static_cast<ScalarType>(v.index()); }

std::string_view to_string(ScalarType t) {
    switch (t) {
    case ScalarType::Int: return "int";
    case ScalarType::Float: return "float";
    case ScalarType::Text: return "text";
    }
    return "?";
}

std::optional<ScalarType> parse_scalar_type(std::string_view s) {
    if (s == "int") return ScalarType::Int;
    if (s == "float") return ScalarType::Float;
    if (s == "text") return ScalarType::Text;
    return std::nullopt;
}

std::string to_string(const Value& v) {
    switch (type_of(v)) {
    case ScalarType::Int: return std::to_string(std::get<std::int64_t>(v));
    case ScalarType::Float: {
        std::ostringstream os;
        os.precision(17);
        os << std::get<double>(v);
        return os.str();
    }
    case ScalarType::Text: return std::get<std::string>(v);
    }
    return {};
}

std::optional<std::partial_ordering> compare_values(const Value& a, const Value& b) {
    auto ta = type_of(a), tb = type_of(b);
    if (ta == ScalarType::Text || tb == ScalarType::Text) {
        if (ta != tb) return std::nullopt;
        return std::get<std::string>(a) <=> std::get<std::string>(b);
    }
    if (ta == ScalarType::Int && tb == ScalarType::Int) return std::get<std::int64_t>(a) <=> std::get<std::int64_t>(b);
    auto as_double = [](const Value& v) {
        return type_of(v) == ScalarType::Int ? static_cast<double>(std::get<std::int64_t>(v)) : std::get<double>(v);
    };
    return as_double(a) <=> as_double(b);
}

Value parse_value(std::string_view text, ScalarType type) {
    switch (type) {
    case ScalarType::Int: {
        std::int64_t out = 0;
        auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
        if (ec != std::errc{} || p != text.data() + text.size())
            fail(ErrorCode::TypeMismatch, "not an integer: '" + std::string(text) + "'");
        return out;
    }
    case ScalarType::Float: {
        std::string s(text);
        char* end = nullptr;
        double d = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size()) fail(ErrorCode::TypeMismatch, "not a float: '" + s + "'");
        return d;
    }
    case ScalarType::Text:
        if (text.size() > kMaxTextBytes) fail(ErrorCode::TypeMismatch, "text longer than 64 bytes");
        return std::string(text);
    }
    return std::int64_t{0};
}

std::optional<std::size_t> Schema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i)
        if (columns_[i].name == name) return i;
    return std::nullopt;
}

std::size_t Schema::require(std::string_view name) const {
    auto idx = index_of(name);
    if (!idx) fail(ErrorCode::UnknownColumn, std::string(name));
    return *idx;
}

void Schema::check(const std::vector<Value>& values) const {
    if (values.size() != columns_.size())
        fail(ErrorCode::TypeMismatch,
             "arity " + std::to_string(values.size()) + " != " + std::to_string(columns_.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (type_of(values[i]) != columns_[i].type)
            fail(ErrorCode::TypeMismatch, "column '" + columns_[i].name + "' expects " +
                                              std::string(to_string(columns_[i].type)));
        if (columns_[i].type == ScalarType::Text && std::get<std::string>(values[i]).size() > kMaxTextBytes)
            fail(ErrorCode::TypeMismatch, "column '" + columns_[i].name + "' text longer than 64 bytes");
    }
}

} // namespace streamtx
