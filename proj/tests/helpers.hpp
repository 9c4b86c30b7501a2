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

#include <cstdint>

#include "dyncov/random.hpp"
#include "dyncov/types.hpp"

namespace testing_support {

inline dyncov::Matrix normal_matrix(std::uint64_t seed, Eigen::Index rows, Eigen::Index cols,
                                    std::uint64_t index = 0) {
    auto eng = dyncov::rng::make_stream(seed, dyncov::rng::StreamTag::Test, index);
    dyncov::rng::NormalSampler normal;
    dyncov::Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(eng);
    return m;
}

/// Rows drawn from N(0, sigma) through its Cholesky factor.
inline dyncov::Matrix correlated_normal(std::uint64_t seed, Eigen::Index rows, const dyncov::Matrix& sigma,
                                        std::uint64_t index = 0) {
    const dyncov::Matrix l = sigma.llt().matrixL();
    return normal_matrix(seed, rows, sigma.rows(), index) * l.transpose();
}

}  // namespace testing_support
