/*
   Copyright 2026 The dyncov Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "dyncov/errors.hpp"

namespace dyncov {

/// Benjamini-Hochberg step-up adjustment, returned in input order:
/// adj_(i) = min_{j >= i} min(1, p_(j) m / j) over ascending p.
inline std::vector<double> bh_adjust(std::span<const double> p) {
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::ValidationError, "p-values must lie in [0, 1]");
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

    std::vector<double> adjusted(m);
    double running = 1.0;
    for (std::size_t k = m; k-- > 0;) {
        const double scaled = p[order[k]] * static_cast<double>(m) / static_cast<double>(k + 1);
        running = std::min(running, scaled);
        adjusted[order[k]] = std::min(running, 1.0);
    }
    return adjusted;
}

inline std::vector<double> bh_adjust(const std::vector<double>& p) { return bh_adjust(std::span<const double>(p)); }

}  // namespace dyncov
