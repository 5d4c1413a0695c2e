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

#include "streamtx/window.hpp"

namespace streamtx {

FullWindowEvent WindowTable::event() const {
    return FullWindowEvent{spec_.name, std::vector<Tuple>(active_.begin(), active_.end())};
}

std::vector<FullWindowEvent> WindowTable::insert(std::span<const Tuple> tuples, WindowUndo* undo) {
    if (undo) {
        undo->full_seen_before = full_seen_;
        undo->staged_appended = tuples.size();
    }
    staged_.insert(staged_.end(), tuples.begin(), tuples.end());

    std::vector<FullWindowEvent> events;
    const auto size = spec_.size, slide = spec_.slide;
    while (true) {
        WindowUndo::Slide step;
        if (!full_seen_) {
            if (active_.size() + staged_.size() < size) break;
            while (active_.size() < size) {
                active_.push_back(std::move(staged_.front()));
                staged_.pop_front();
                ++step.activated;
            }
            full_seen_ = true;
        } else {
            if (staged_.size() < slide) break;
            for (std::uint64_t i = 0; i < slide && !active_.empty(); ++i) {
                if (undo) step.expired.push_back(std::move(active_.front()));
                active_.pop_front();
            }
            for (std::uint64_t i = 0; i < slide; ++i) {
                active_.push_back(std::move(staged_.front()));
                staged_.pop_front();
                ++step.activated;
            }
        }
        if (undo) undo->slides.push_back(std::move(step));
        events.push_back(event());
    }
    return events;
}

void WindowTable::undo(WindowUndo& u) {
    for (auto it = u.slides.rbegin(); it != u.slides.rend(); ++it) {
        for (std::size_t i = 0; i < it->activated; ++i) {
            staged_.push_front(std::move(active_.back()));
            active_.pop_back();
        }
        for (auto e = it->expired.rbegin(); e != it->expired.rend(); ++e) active_.push_front(std::move(*e));
    }
    for (std::size_t i = 0; i < u.staged_appended; ++i) staged_.pop_back();
    full_seen_ = u.full_seen_before;
}

} // namespace streamtx
