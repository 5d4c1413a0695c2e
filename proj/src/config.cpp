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

#include "streamtx/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "streamtx/error.hpp"

namespace streamtx {

std::int64_t ConfigValue::as_int() const {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
    fail(ErrorCode::ConfigError, "expected an integer, got " + serialize_value(*this));
}

double ConfigValue::as_double() const {
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    fail(ErrorCode::ConfigError, "expected a number, got " + serialize_value(*this));
}

const std::string& ConfigValue::as_string() const {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    fail(ErrorCode::ConfigError, "expected a string, got " + serialize_value(*this));
}

bool ConfigValue::as_bool() const {
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    fail(ErrorCode::ConfigError, "expected true or false, got " + serialize_value(*this));
}

const ConfigValue::List& ConfigValue::as_list() const {
    if (const auto* l = std::get_if<List>(&v)) return *l;
    fail(ErrorCode::ConfigError, "expected a list, got " + serialize_value(*this));
}

std::vector<std::string> ConfigValue::as_strings() const {
    std::vector<std::string> out;
    for (const auto& e : as_list()) out.push_back(e.as_string());
    return out;
}

const ConfigValue* ConfigSection::find(std::string_view key) const {
    for (const auto& [k, v] : entries)
        if (k == key) return &v;
    return nullptr;
}

void ConfigSection::set(std::string key, ConfigValue v) {
    for (auto& [k, old] : entries)
        if (k == key) {
            old = std::move(v);
            return;
        }
    entries.emplace_back(std::move(key), std::move(v));
}

namespace {

std::string where(const ConfigSection& s, std::string_view key) {
    return "[" + s.kind + (s.name.empty() ? "" : " " + s.name) + "] " + std::string(key) + ": ";
}

template <typename F>
auto checked(const ConfigSection& s, std::string_view key, F f) {
    try {
        return f();
    } catch (const Error& e) {
        fail(ErrorCode::ConfigError, where(s, key) + e.what());
    }
}

} // namespace

std::int64_t ConfigSection::get_int(std::string_view key, std::int64_t dflt) const {
    const auto* v = find(key);
    return v ? checked(*this, key, [&] { return v->as_int(); }) : dflt;
}

double ConfigSection::get_double(std::string_view key, double dflt) const {
    const auto* v = find(key);
    return v ? checked(*this, key, [&] { return v->as_double(); }) : dflt;
}

std::string ConfigSection::get_string(std::string_view key, std::string dflt) const {
    const auto* v = find(key);
    return v ? checked(*this, key, [&] { return v->as_string(); }) : dflt;
}

bool ConfigSection::get_bool(std::string_view key, bool dflt) const {
    const auto* v = find(key);
    return v ? checked(*this, key, [&] { return v->as_bool(); }) : dflt;
}

std::vector<std::string> ConfigSection::get_strings(std::string_view key) const {
    const auto* v = find(key);
    return v ? checked(*this, key, [&] { return v->as_strings(); }) : std::vector<std::string>{};
}

void ConfigSection::allow_only(std::initializer_list<std::string_view> allowed) const {
    for (const auto& [k, v] : entries)
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            fail(ErrorCode::ConfigError, where(*this, k) + "unknown key (line " + std::to_string(line) + ")");
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : t_(text) {}

    ConfigDoc run() {
        ConfigDoc doc;
        for (;;) {
            skip_blank();
            if (eof()) break;
            if (peek() == '[') {
                auto& s = doc.sections.emplace_back();
                s.line = line_;
                ++pos_;
                auto words = header();
                if (words.empty() || words.size() > 2) error("section header needs a kind and optional name");
                s.kind = words[0];
                if (words.size() == 2) s.name = words[1];
            } else {
                if (doc.sections.empty()) error("key outside of any section");
                auto key = ident();
                skip_inline();
                expect('=');
                auto v = value();
                auto& sec = doc.sections.back();
                if (sec.find(key)) error("duplicate key " + key);
                sec.entries.emplace_back(std::move(key), std::move(v));
                skip_inline();
                if (!eof() && peek() != '\n') error("trailing characters after value");
            }
        }
        return doc;
    }

private:
    bool eof() const { return pos_ >= t_.size(); }
    char peek() const { return t_[pos_]; }

    [[noreturn]] void error(const std::string& msg) const {
        fail(ErrorCode::ConfigError, "line " + std::to_string(line_) + ": " + msg);
    }

    void skip_comment() {
        while (!eof() && peek() != '\n') ++pos_;
    }

    void skip_inline() {
        while (!eof()) {
            char c = peek();
            if (c == ' ' || c == '\t' || c == '\r') ++pos_;
            else if (c == '#') skip_comment();
            else break;
        }
    }

    void skip_blank() {
        while (!eof()) {
            char c = peek();
            if (c == '\n') {
                ++line_;
                ++pos_;
            } else if (c == ' ' || c == '\t' || c == '\r') {
                ++pos_;
            } else if (c == '#') {
                skip_comment();
            } else {
                break;
            }
        }
    }

    void expect(char c) {
        if (eof() || peek() != c) error(std::string("expected '") + c + "'");
        ++pos_;
    }

    static bool ident_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == '$';
    }

    std::string ident() {
        auto start = pos_;
        while (!eof() && ident_char(peek())) ++pos_;
        if (pos_ == start) error("expected a name");
        return std::string(t_.substr(start, pos_ - start));
    }

    std::vector<std::string> header() {
        std::vector<std::string> words;
        for (;;) {
            skip_inline();
            if (eof()) error("unterminated section header");
            if (peek() == ']') {
                ++pos_;
                break;
            }
            words.push_back(ident());
        }
        skip_inline();
        if (!eof() && peek() != '\n') error("trailing characters after section header");
        return words;
    }

    ConfigValue value() {
        skip_inline();
        if (eof()) error("missing value");
        char c = peek();
        if (c == '"') return string_lit();
        if (c == '[') {
            ++pos_;
            ConfigValue::List items;
            for (;;) {
                skip_blank();
                if (eof()) error("unterminated list");
                if (peek() == ']') {
                    ++pos_;
                    break;
                }
                items.push_back(value());
                skip_blank();
                if (!eof() && peek() == ',') {
                    ++pos_;
                    continue;
                }
                skip_blank();
                if (eof() || peek() != ']') error("expected ',' or ']' in list");
            }
            return items;
        }
        auto start = pos_;
        while (!eof() && (ident_char(peek()) || peek() == '+')) ++pos_;
        auto word = t_.substr(start, pos_ - start);
        if (word == "true") return true;
        if (word == "false") return false;
        if (word.empty()) error("bad value");
        bool is_float = word.find_first_of(".eEn") != std::string_view::npos;
        if (!is_float) {
            std::int64_t i = 0;
            auto [p, ec] = std::from_chars(word.data(), word.data() + word.size(), i);
            if (ec != std::errc() || p != word.data() + word.size()) error("bad integer " + std::string(word));
            return i;
        }
        try {
            std::size_t used = 0;
            double d = std::stod(std::string(word), &used);
            if (used != word.size()) error("bad number " + std::string(word));
            return d;
        } catch (const std::logic_error&) {
            error("bad number " + std::string(word));
        }
    }

    ConfigValue string_lit() {
        ++pos_;
        std::string out;
        for (;;) {
            if (eof() || peek() == '\n') error("unterminated string");
            char c = t_[pos_++];
            if (c == '"') break;
            if (c == '\\') {
                if (eof()) error("bad escape");
                char e = t_[pos_++];
                switch (e) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: error(std::string("bad escape \\") + e);
                }
            } else {
                out += c;
            }
        }
        return out;
    }

    std::string_view t_;
    std::size_t pos_ = 0;
    int line_ = 1;
};

} // namespace

ConfigDoc ConfigDoc::parse(std::string_view text) { return Parser(text).run(); }

ConfigDoc ConfigDoc::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::ConfigError, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string serialize_value(const ConfigValue& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::int64_t>) {
                return std::to_string(x);
            } else if constexpr (std::is_same_v<T, double>) {
                char buf[64];
                auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
                std::string s(buf, p);
                if (s.find_first_of(".en") == std::string::npos) s += ".0";
                return s;
            } else if constexpr (std::is_same_v<T, std::string>) {
                std::string s = "\"";
                for (char c : x) {
                    if (c == '"' || c == '\\') s += '\\', s += c;
                    else if (c == '\n') s += "\\n";
                    else if (c == '\t') s += "\\t";
                    else s += c;
                }
                return s + "\"";
            } else if constexpr (std::is_same_v<T, bool>) {
                return x ? "true" : "false";
            } else {
                std::string s = "[";
                for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ", " : "") + serialize_value(x[i]);
                return s + "]";
            }
        },
        v.v);
}

std::string ConfigDoc::serialize() const {
    std::string out;
    for (const auto& s : sections) {
        if (!out.empty()) out += "\n";
        out += "[" + s.kind + (s.name.empty() ? "" : " " + s.name) + "]\n";
        for (const auto& [k, v] : s.entries) out += k + " = " + serialize_value(v) + "\n";
    }
    return out;
}

const ConfigSection* ConfigDoc::find(std::string_view kind, std::string_view name) const {
    for (const auto& s : sections)
        if (s.kind == kind && s.name == name) return &s;
    return nullptr;
}

std::vector<const ConfigSection*> ConfigDoc::all(std::string_view kind) const {
    std::vector<const ConfigSection*> out;
    for (const auto& s : sections)
        if (s.kind == kind) out.push_back(&s);
    return out;
}

ConfigSection& ConfigDoc::add(std::string kind, std::string name) {
    auto& s = sections.emplace_back();
    s.kind = std::move(kind);
    s.name = std::move(name);
    return s;
}

} // namespace streamtx
