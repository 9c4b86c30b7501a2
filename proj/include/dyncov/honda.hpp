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

// Honda-type O(1/N) size correction for score tests of heteroskedasticity.
//
// The corrected critical value is the cubic
//
//   f(C) = C + C (A3 - A2 + A1) / (12 N P)
//            + C^2 (A2 - 2 A3) / (12 N P (P+2))
//            + C^3 A3 / (12 N P (P+2)(P+4))
//
// and the adjusted statistic is f^{-1}(q). The coefficients follow from the
// Edgeworth expansion of the quadratic form S'S, S = B' f, with B the
// orthonormal centered covariates and f standardized score contributions
// with third cumulant k3 and fourth cumulant k4. Writing d_i = |B_i|^2 and
// D = B B':
//
//   A1 = -24 P
//   A2 = 3 k4 N sum_i d_i^2 - 24 P (P+2)
//   A3 = k3^2 N (3 |B'd|^2 + 2 sum_ij D_ij^3)
//
// The -24 terms come from estimating the error scale under the null, which
// multiplies the m-th moment of q by N^{2m} / prod_{j<2m} (N + 2j).
// The defaults k3^2 = 8, k4 = 12 are the normal-theory values for the
// heteroskedasticity LM score, so the coefficients depend only on the
// covariates, N and P.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "dyncov/core_stats.hpp"
#include "dyncov/errors.hpp"
#include "dyncov/types.hpp"

namespace dyncov {

struct ScoreCumulants {
    double third_squared = 8.0;
    double fourth = 12.0;
};

struct HondaCoefficients {
    double a1 = 0.0;
    double a2 = 0.0;
    double a3 = 0.0;
    Eigen::Index n = 0;
    int p = 1;

    void validate() const {
        if (n < 1 || p < 1) fail(ErrorKind::ValidationError, "correction needs N >= 1 and P >= 1");
        if (!std::isfinite(a1) || !std::isfinite(a2) || !std::isfinite(a3))
            fail(ErrorKind::ValidationError, "correction coefficients must be finite");
        if (!(a3 > 0.0)) fail(ErrorKind::ValidationError, "A3 must be positive");
    }

    /// Polynomial coefficients of f(C) = c1 C + c2 C^2 + c3 C^3.
    std::array<double, 3> cubic() const {
        const double base = 12.0 * static_cast<double>(n) * p;
        return {1.0 + (a3 - a2 + a1) / base, (a2 - 2.0 * a3) / (base * (p + 2)),
                a3 / (base * (p + 2) * (p + 4))};
    }
};

inline double honda_critical(double c_gamma, const HondaCoefficients& coeffs) {
    coeffs.validate();
    if (!(c_gamma >= 0.0)) fail(ErrorKind::ValidationError, "critical value must be nonnegative");
    const auto [c1, c2, c3] = coeffs.cubic();
    return c_gamma * (c1 + c_gamma * (c2 + c_gamma * c3));
}

inline double honda_derivative(double c, const HondaCoefficients& coeffs) {
    const auto [c1, c2, c3] = coeffs.cubic();
    return c1 + c * (2.0 * c2 + 3.0 * c * c3);
}

/// Smallest value of f' on [0, hi]; f is monotone there iff this is positive.
inline double honda_min_slope(double hi, const HondaCoefficients& coeffs) {
    const auto c = coeffs.cubic();
    double lowest = std::min(honda_derivative(0.0, coeffs), honda_derivative(hi, coeffs));
    if (c[2] > 0.0) {
        const double vertex = -c[1] / (3.0 * c[2]);
        if (vertex > 0.0 && vertex < hi) lowest = std::min(lowest, honda_derivative(vertex, coeffs));
    }
    return lowest;
}

inline bool honda_is_monotone(double hi, const HondaCoefficients& coeffs) {
    return honda_min_slope(hi, coeffs) > 0.0;
}

/// Solves f(x) = q for x by Newton steps kept inside a bisection bracket.
inline double honda_adjust(double q, const HondaCoefficients& coeffs) {
    coeffs.validate();
    if (!(q >= 0.0) || !std::isfinite(q)) fail(ErrorKind::ValidationError, "statistic must be finite and nonnegative");
    if (q == 0.0) return 0.0;

    double hi = 2.0 * q + 10.0;
    for (int grow = 0; honda_critical(hi, coeffs) < q; ++grow) {
        if (grow > 60) fail(ErrorKind::NonMonotoneCorrection, "no bracket found for the adjusted statistic");
        hi *= 2.0;
    }
    if (!honda_is_monotone(hi, coeffs))
        fail(ErrorKind::NonMonotoneCorrection, "critical-value map is not increasing on the working range");

    double lo = 0.0;
    double x = std::clamp(q, lo, hi);
    for (int iter = 0; iter < 200; ++iter) {
        const double fx = honda_critical(x, coeffs) - q;
        if (std::abs(fx) <= 1e-13 * std::max(1.0, q)) return x;
        if (fx < 0.0)
            lo = x;
        else
            hi = x;
        double next = x - fx / honda_derivative(x, coeffs);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (hi - lo <= std::numeric_limits<double>::epsilon() * std::max(1.0, hi)) return next;
        x = next;
    }
    return x;
}

namespace detail {

struct LeverageSums {
    double d_squared = 0.0;    // sum_i d_i^2
    double d_quadratic = 0.0;  // |B'd|^2 = sum_ij d_i D_ij d_j
    double d_cubed = 0.0;      // sum_ij D_ij^3
};

inline LeverageSums leverage_sums(const Matrix& basis) {
    const Eigen::Index n = basis.rows();
    const Eigen::Index p = basis.cols();
    const Vector d = basis.rowwise().squaredNorm();

    LeverageSums s;
    s.d_squared = d.squaredNorm();
    s.d_quadratic = (basis.transpose() * d).squaredNorm();
    // sum_ij (b_i . b_j)^3 = sum_abc (sum_i b_ia b_ib b_ic)^2
    for (Eigen::Index a = 0; a < p; ++a)
        for (Eigen::Index b = 0; b < p; ++b)
            for (Eigen::Index c = 0; c < p; ++c) {
                double t = 0.0;
                for (Eigen::Index i = 0; i < n; ++i) t += basis(i, a) * basis(i, b) * basis(i, c);
                s.d_cubed += t * t;
            }
    return s;
}

}  // namespace detail

inline HondaCoefficients honda_coefficients(const CovariateBasis& basis, Eigen::Index n, int p,
                                            ScoreCumulants cumulants = {}) {
    if (basis.basis.rows() != n || basis.basis.cols() != p)
        fail(ErrorKind::ShapeError, "basis dimensions do not match N and P");
    const auto sums = detail::leverage_sums(basis.basis);
    const double nn = static_cast<double>(n);
    HondaCoefficients c;
    c.n = n;
    c.p = p;
    c.a1 = -24.0 * p;
    c.a2 = 3.0 * cumulants.fourth * nn * sums.d_squared - 24.0 * p * (p + 2);
    c.a3 = cumulants.third_squared * nn * (3.0 * sums.d_quadratic + 2.0 * sums.d_cubed);
    return c;
}

inline HondaCoefficients honda_coefficients(const VarianceCovariates& x, Eigen::Index n, int p,
                                            ScoreCumulants cumulants = {}) {
    if (x.rows() != n || x.cols() != p) fail(ErrorKind::ShapeError, "covariate dimensions do not match N and P");
    return honda_coefficients(orthonormalize(x), n, p, cumulants);
}

}  // namespace dyncov
