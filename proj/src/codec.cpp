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

#include "streamtx/codec.hpp"

#include <bit>
#include <cstring>

#include <zlib.h>

#include "streamtx/error.hpp"

namespace streamtx {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks for very large bodies.
    std::size_t off = 0;
    while (off < bytes.size()) {
        auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
        crc = ::crc32(crc, bytes.data() + off, n);
        off += n;
    }
    return static_cast<std::uint32_t>(crc);
}

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s);
}

void ByteWriter::bytes(std::span<const std::uint8_t> b) {
    u32(static_cast<std::uint32_t>(b.size()));
    buf_.insert(buf_.end(), b.begin(), b.end());
}

void ByteWriter::raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

void ByteWriter::value(const Value& v) {
    u8(static_cast<std::uint8_t>(type_of(v)));
    switch (type_of(v)) {
    case ScalarType::Int: i64(std::get<std::int64_t>(v)); break;
    case ScalarType::Float: f64(std::get<double>(v)); break;
    case ScalarType::Text: str(std::get<std::string>(v)); break;
    }
}

void ByteWriter::values(const std::vector<Value>& vs) {
    u32(static_cast<std::uint32_t>(vs.size()));
    for (const auto& v : vs) value(v);
}

void ByteWriter::tuple(const Tuple& t) {
    u64(t.meta.tuple_id);
    u64(t.meta.batch_id);
    i64(t.meta.ts);
    values(t.values);
}

void ByteWriter::batch(const AtomicBatch& b) {
    u64(b.batch_id);
    u32(static_cast<std::uint32_t>(b.tuples.size()));
    for (const auto& t : b.tuples) tuple(t);
}

void ByteWriter::schema(const Schema& s) {
    u32(static_cast<std::uint32_t>(s.arity()));
    for (const auto& c : s.columns()) {
        str(c.name);
        u8(static_cast<std::uint8_t>(c.type));
    }
}

void ByteReader::need(std::size_t n) const {
    if (data_.size() - pos_ < n) fail(ErrorCode::CorruptSnapshot, "truncated input");
}

std::uint8_t ByteReader::u8() {
    need(1);
    return data_[pos_++];
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
    auto n = u32();
    return raw(n);
}

std::vector<std::uint8_t> ByteReader::bytes() {
    auto n = u32();
    need(n);
    std::vector<std::uint8_t> out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
}

std::string ByteReader::raw(std::size_t n) {
    need(n);
    std::string out(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return out;
}

Value ByteReader::value() {
    switch (u8()) {
    case 0: return i64();
    case 1: return f64();
    case 2: return str();
    default: fail(ErrorCode::CorruptSnapshot, "bad value tag");
    }
}

std::vector<Value> ByteReader::values() {
    auto n = u32();
    std::vector<Value> out;
    out.reserve(std::min<std::size_t>(n, remaining()));
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(value());
    return out;
}

Tuple ByteReader::tuple() {
    Tuple t;
    t.meta.tuple_id = u64();
    t.meta.batch_id = u64();
    t.meta.ts = i64();
    t.values = values();
    return t;
}

AtomicBatch ByteReader::batch() {
    AtomicBatch b;
    b.batch_id = u64();
    auto n = u32();
    b.tuples.reserve(std::min<std::size_t>(n, remaining()));
    for (std::uint32_t i = 0; i < n; ++i) b.tuples.push_back(tuple());
    return b;
}

Schema ByteReader::schema() {
    auto n = u32();
    std::vector<Column> cols;
    for (std::uint32_t i = 0; i < n; ++i) {
        Column c;
        c.name = str();
        auto t = u8();
        if (t > 2) fail(ErrorCode::CorruptSnapshot, "bad column type");
        c.type = static_cast<ScalarType>(t);
        cols.push_back(std::move(c));
    }
    return Schema(std::move(cols));
}

} // namespace streamtx
