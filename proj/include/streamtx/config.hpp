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
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace streamtx {

/// A typed config value: integer, float, quoted string, bool or list.
struct ConfigValue {
    using List = std::vector<ConfigValue>;
    std::variant<std::int64_t, double, std::string, bool, List> v;

    ConfigValue() = default;
    ConfigValue(std::int64_t i) : v(i) {}
    ConfigValue(int i) : v(std::int64_t{i}) {}
    ConfigValue(double d) : v(d) {}
    ConfigValue(std::string s) : v(std::move(s)) {}
    ConfigValue(const char* s) : v(std::string(s)) {}
    ConfigValue(bool b) : v(b) {}
    ConfigValue(List l) : v(std::move(l)) {}

    std::int64_t as_int() const;
    /// Accepts integers too.
    double as_double() const;
    const std::string& as_string() const;
    bool as_bool() const;
    const List& as_list() const;
    std::vector<std::string> as_strings() const;

    bool operator==(const ConfigValue&) const = default;
};

struct ConfigSection {
    std::string kind;
    std::string name;
    std::vector<std::pair<std::string, ConfigValue>> entries;
    int line = 0;

    const ConfigValue* find(std::string_view key) const;
    void set(std::string key, ConfigValue v);

    std::int64_t get_int(std::string_view key, std::int64_t dflt) const;
    double get_double(std::string_view key, double dflt) const;
    std::string get_string(std::string_view key, std::string dflt) const;
    bool get_bool(std::string_view key, bool dflt) const;
    std::vector<std::string> get_strings(std::string_view key) const;
    /// Throws ConfigError naming the first key not in `allowed`.
    void allow_only(std::initializer_list<std::string_view> allowed) const;

    bool operator==(const ConfigSection& o) const { return kind == o.kind && name == o.name && entries == o.entries; }
};

/// Sectioned key-value text:
///
///     # comment
///     [kind name]
///     key = 12 | 1.5 | "text" | true | [ "a", 2, ... ]
///
/// Lists may span lines. serialize() output parses back to an equal document.
struct ConfigDoc {
    std::vector<ConfigSection> sections;

    static ConfigDoc parse(std::string_view text);
    static ConfigDoc load(const std::string& path);
    std::string serialize() const;

    const ConfigSection* find(std::string_view kind, std::string_view name = {}) const;
    std::vector<const ConfigSection*> all(std::string_view kind) const;
    ConfigSection& add(std::string kind, std::string name = {});

    bool operator==(const ConfigDoc&) const = default;
};

std::string serialize_value(const ConfigValue& v);

} // namespace streamtx
