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

// Counter-based random streams.
//
// Every stochastic task (a simulation replicate, a permutation, a block of
// Monte-Carlo draws) owns a Philox4x32-10 stream addressed by
// (seed, tag, index). Streams never share counter space, so results do not
// depend on how tasks are scheduled across threads.
//
// Salmon et al., "Parallel random numbers: as easy as 1, 2, 3", SC 2011.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace dyncov::rng {

class Philox4x32 {
  public:
    using result_type = std::uint64_t;
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    /// The high half of the counter is fixed to `stream`; the low half counts blocks.
    Philox4x32(std::uint64_t key, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)}, stream_(stream) {}

    result_type operator()() noexcept {
        if (used_ == 2) {
            buffer_ = bijection({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                 static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                                key_);
            ++block_;
            used_ = 0;
        }
        const auto lo = buffer_[2 * used_];
        const auto hi = buffer_[2 * used_ + 1];
        ++used_;
        return (static_cast<std::uint64_t>(hi) << 32) | lo;
    }

    /// Ten-round Philox bijection on one 128-bit counter block.
    static constexpr Block bijection(Block ctr, Key key) noexcept {
        constexpr std::uint32_t m0 = 0xD2511F53u;
        constexpr std::uint32_t m1 = 0xCD9E8D57u;
        constexpr std::uint32_t w0 = 0x9E3779B9u;
        constexpr std::uint32_t w1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            key[0] += w0;
            key[1] += w1;
        }
        return ctr;
    }

  private:
    Key key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    Block buffer_{};
    int used_ = 2;
};

/// Stream namespaces; the tag occupies the top 16 bits of the stream id.
enum class StreamTag : std::uint16_t {
    Covariates = 1,
    Replicate = 2,
    Permutation = 3,
    GammaSum = 4,
    Dataset = 5,
    Test = 100,
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Child seed for a nested task family, e.g. one hub inside a batch.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
    return splitmix64(seed ^ splitmix64(salt + 0x632BE59BD9B4E019ull));
}

inline Philox4x32 make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t index) noexcept {
    const std::uint64_t stream = (static_cast<std::uint64_t>(tag) << 48) | (index & 0xFFFF'FFFF'FFFFull);
    return Philox4x32(seed, stream);
}

/// Uniform in [0, 1), 53-bit resolution.
template <class Engine>
double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Uniform in (0, 1).
template <class Engine>
double uniform_open(Engine& eng) {
    return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Unbiased integer in [0, bound) (Lemire's multiply-and-reject).
template <class Engine>
std::uint64_t bounded(Engine& eng, std::uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>(eng()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(eng()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

/// Standard normal variates by the Marsaglia polar method.
class NormalSampler {
  public:
    template <class Engine>
    double operator()(Engine& eng) {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double a, b, s;
        do {
            a = 2.0 * uniform01(eng) - 1.0;
            b = 2.0 * uniform01(eng) - 1.0;
            s = a * a + b * b;
        } while (s >= 1.0 || s == 0.0);
        const double scale = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = b * scale;
        has_spare_ = true;
        return a * scale;
    }

  private:
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Chi-square with integer degrees of freedom: -2 log of a product of uniforms
/// for each pair of degrees, one squared normal for an odd remainder.
template <class Engine>
double chi_square(Engine& eng, NormalSampler& normal, int df) {
    double total = 0.0;
    for (int k = 0; k + 1 < df; k += 2) total -= 2.0 * std::log(uniform_open(eng));
    if (df % 2 == 1) {
        const double z = normal(eng);
        total += z * z;
    }
    return total;
}

/// In-place Fisher-Yates shuffle.
template <class Engine, class T>
void shuffle(Engine& eng, std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(bounded(eng, i));
        std::swap(items[i - 1], items[j]);
    }
}

template <class Engine>
std::vector<std::size_t> random_permutation(Engine& eng, std::size_t n) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    shuffle(eng, perm);
    return perm;
}

}  // namespace dyncov::rng
