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

// Pairwise Rao score test for a covariance that varies with covariates.
//
// For residuals u1, u2 and null MLEs (s1, s2, r) the per-sample score
// contribution is
//
//   f_i = [r(s1 s2 - r^2) + (s1 s2 + r^2) u1_i u2_i - s1 r u2_i^2 - s2 r u1_i^2]
//         / sqrt((s1 s2 + r^2)(s1 s2 - r^2)^2)
//
// and q = sum_p (sum_i B_ip f_i)^2 with B the centered, orthonormalized
// variance covariates. Under constant covariance q is asymptotically
// chi-square with P degrees of freedom.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "dyncov/core_stats.hpp"
#include "dyncov/errors.hpp"
#include "dyncov/honda.hpp"
#include "dyncov/types.hpp"

namespace dyncov {

inline constexpr double kMinPValue = 1e-300;

struct FVector {
    Vector values;

    double sum() const { return values.sum(); }
    Eigen::Index size() const noexcept { return values.size(); }
};

struct PairScoreResult {
    std::string gene_a;
    std::string gene_b;
    double q = 0.0;
    int df = 0;
    double p_asymptotic = 1.0;
    std::optional<double> q_adjusted;
    std::optional<double> p_adjusted;
};

/// Upper tail of chi-square(df) at q, clamped to [1e-300, 1].
inline double chisq_upper_tail(double q, int df) {
    if (df < 1) fail(ErrorKind::ValidationError, "degrees of freedom must be positive");
    if (std::isnan(q) || q < 0.0) fail(ErrorKind::ValidationError, "chi-square statistic must be nonnegative");
    if (q == 0.0) return 1.0;
    if (std::isinf(q)) return kMinPValue;
    const double p = boost::math::gamma_q(0.5 * df, 0.5 * q);
    return std::clamp(p, kMinPValue, 1.0);
}

inline FVector f_vector(VectorCRef u1, VectorCRef u2, const NullMles& m) {
    if (u1.size() != u2.size()) fail(ErrorKind::ShapeError, "residual vectors differ in length");
    const double s = m.product();
    const double r = m.rho_hat;
    const double r2 = r * r;
    if (r2 >= (1.0 - kDegeneracyTolerance) * s)
        fail(ErrorKind::DegenerateCorrelation, "null MLEs are perfectly correlated");

    const double scale = 1.0 / ((s - r2) * std::sqrt(s + r2));
    const double constant = r * (s - r2);
    FVector f;
    f.values = (constant + (s + r2) * u1.array() * u2.array() - m.sigma1_sq * r * u2.array().square() -
                m.sigma2_sq * r * u1.array().square()) *
               scale;
    return f;
}

/// q for a precomputed score vector against an orthonormal centered basis.
inline double score_statistic(const FVector& f, const CovariateBasis& basis) {
    if (f.size() != basis.basis.rows()) fail(ErrorKind::ShapeError, "score vector and covariates differ in length");
    return (basis.basis.transpose() * f.values).squaredNorm();
}

/// Fast path for batch drivers: the basis and correction are computed once per X.
inline PairScoreResult pairwise_score(VectorCRef u1, VectorCRef u2, const CovariateBasis& basis,
                                      const HondaCoefficients* correction = nullptr) {
    if (u1.size() != basis.basis.rows() || u2.size() != basis.basis.rows())
        fail(ErrorKind::ShapeError, "residual vectors and covariates differ in length");
    const NullMles m = null_mles(u1, u2);
    const FVector f = f_vector(u1, u2, m);

    PairScoreResult out;
    out.df = static_cast<int>(basis.basis.cols());
    out.q = score_statistic(f, basis);
    out.p_asymptotic = chisq_upper_tail(out.q, out.df);
    if (correction != nullptr) {
        out.q_adjusted = honda_adjust(out.q, *correction);
        out.p_adjusted = chisq_upper_tail(*out.q_adjusted, out.df);
    }
    return out;
}

inline PairScoreResult pairwise_score(VectorCRef u1, VectorCRef u2, const VarianceCovariates& x,
                                      bool small_sample_correction = false) {
    if (u1.size() != x.rows()) fail(ErrorKind::ShapeError, "residual vectors and covariates differ in length");
    const CovariateBasis basis = orthonormalize(x);
    if (!small_sample_correction) return pairwise_score(u1, u2, basis);
    const HondaCoefficients coeffs = honda_coefficients(basis, x.rows(), static_cast<int>(x.cols()));
    return pairwise_score(u1, u2, basis, &coeffs);
}

}  // namespace dyncov
