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

#include <deque>
#include <span>
#include <vector>

#include "streamtx/model.hpp"
#include "streamtx/value.hpp"

namespace streamtx {

/// One newly available full window: the active contents, oldest first.
struct FullWindowEvent {
    std::string window;
    std::vector<Tuple> contents;

    bool operator==(const FullWindowEvent&) const = default;
};

/// Inverse of a single window_insert call.
struct WindowUndo {
    struct Slide {
        std::vector<Tuple> expired;
        std::size_t activated = 0;
    };
    std::size_t staged_appended = 0;
    std::vector<Slide> slides;
    bool full_seen_before = false;
};

/// Tuple-based sliding window with staging. New tuples are staged (invisible)
/// until a slide condition holds; each satisfied condition expires the oldest
/// active tuples, activates the oldest staged ones and yields one event.
///
/// The first event fires once `size` tuples have arrived, then one every
/// `slide` tuples.
class WindowTable {
public:
    WindowTable(WindowSpec spec, Schema schema) : spec_(std::move(spec)), schema_(std::move(schema)) {}

    const WindowSpec& spec() const { return spec_; }
    const Schema& schema() const { return schema_; }
    const std::deque<Tuple>& active() const { return active_; }
    const std::deque<Tuple>& staged() const { return staged_; }
    bool full_seen() const { return full_seen_; }

    std::vector<FullWindowEvent> insert(std::span<const Tuple> tuples, WindowUndo* undo);
    void undo(WindowUndo& u);

    /// Used by snapshot restore only.
    void restore(std::deque<Tuple> active, std::deque<Tuple> staged, bool full_seen) {
        active_ = std::move(active);
        staged_ = std::move(staged);
        full_seen_ = full_seen;
    }

    bool operator==(const WindowTable&) const = default;

private:
    FullWindowEvent event() const;

    WindowSpec spec_;
    Schema schema_;
    std::deque<Tuple> active_;
    std::deque<Tuple> staged_;
    bool full_seen_ = false;
};

} // namespace streamtx
