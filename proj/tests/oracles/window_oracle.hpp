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
#include <vector>

namespace oracle {

/// Every full window of a flat input sequence: the first once `size` values
/// have arrived, then one per `slide` further values.
inline std::vector<std::vector<std::int64_t>> sliding_windows(const std::vector<std::int64_t>& in, std::size_t size,
                                                             std::size_t slide) {
    std::vector<std::vector<std::int64_t>> out;
    for (std::size_t end = size; end <= in.size(); end += slide)
        out.emplace_back(in.begin() + static_cast<std::ptrdiff_t>(end - size), in.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

/// All compositions of n into positive parts, as batch sizes.
inline void compositions(std::size_t n, std::vector<std::size_t>& cur, std::vector<std::vector<std::size_t>>& out) {
    if (n == 0) {
        out.push_back(cur);
        return;
    }
    for (std::size_t k = 1; k <= n; ++k) {
        cur.push_back(k);
        compositions(n - k, cur, out);
        cur.pop_back();
    }
}

inline std::vector<std::vector<std::size_t>> compositions(std::size_t n) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> cur;
    compositions(n, cur, out);
    return out;
}

} // namespace oracle
