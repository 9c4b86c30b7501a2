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

// Local-connectivity test for a hub gene against a set of targets.
//
// d = sum_k q_1k. Under the global null the per-target score vectors are
// jointly normal with correlation matrix H, so d is asymptotically
// sum_k lambda_k chi2_P with lambda the eigenvalues of H; when H cannot be
// trusted the null is simulated by permuting the rows of X.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Eigenvalues>

#include "dyncov/core_stats.hpp"
#include "dyncov/errors.hpp"
#include "dyncov/parallel.hpp"
#include "dyncov/random.hpp"
#include "dyncov/score.hpp"
#include "dyncov/types.hpp"

namespace dyncov {

inline constexpr double kPositiveDefiniteTolerance = 1e-10;
inline constexpr std::size_t kMinGammaSumDraws = 100'000;

struct HubSpec {
    std::string hub;
    std::vector<std::string> targets;

    void validate() const {
        if (targets.empty()) fail(ErrorKind::EmptyTargets, "hub '" + hub + "' has no targets");
        std::unordered_set<std::string> seen;
        for (const auto& t : targets) {
            if (t == hub) fail(ErrorKind::ValidationError, "hub '" + hub + "' lists itself as a target");
            if (!seen.insert(t).second) fail(ErrorKind::ValidationError, "duplicate target '" + t + "'");
        }
    }
};

struct HubStatistic {
    double d = 0.0;
    double mean_q = 0.0;
};

struct HMatrix {
    Matrix h;
    Vector eigenvalues;  // decreasing
    bool positive_definite = false;
};

struct HubResult {
    std::string hub;
    std::vector<std::string> targets;
    std::vector<double> per_target_q;
    double d = 0.0;
    double mean_q = 0.0;
    std::optional<Vector> eigenvalues;
    std::optional<double> p_analytic;
    std::optional<double> p_permutation;
    std::size_t permutations_used = 0;
    std::string status = "ok";
};

struct PermutationOptions {
    std::size_t min_perm = 100;
    std::size_t batch = 100;
    std::size_t max_perm = 1'000'000;
    std::size_t exceed_threshold = 2;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    void validate() const {
        if (min_perm == 0 || batch == 0 || max_perm == 0 || exceed_threshold == 0)
            fail(ErrorKind::ValidationError, "permutation parameters must be positive");
        if (min_perm > max_perm) fail(ErrorKind::ValidationError, "min_perm exceeds max_perm");
    }
};

struct PermutationResult {
    double observed_d = 0.0;
    double p = 1.0;
    std::size_t permutations_used = 0;
    std::size_t exceedances = 0;
    std::size_t degenerate = 0;
};

inline HubStatistic hub_statistic(std::span<const double> q_values) {
    if (q_values.empty()) fail(ErrorKind::EmptyTargets, "no per-target statistics");
    HubStatistic s;
    for (double q : q_values) {
        if (!(q >= 0.0)) fail(ErrorKind::ValidationError, "per-target statistics must be nonnegative");
        s.d += q;
    }
    s.mean_q = s.d / static_cast<double>(q_values.size());
    return s;
}

/// Unnormalized covariance of the score contributions of pairs (hub, k) and
/// (hub, l), from Isserlis' theorem on (u_hub, u_k, u_l). Symmetric in (k, l).
inline double score_cross_moment(double s1, double sk, double sl, double r1k, double r1l, double rkl) {
    const double r1k2 = r1k * r1k;
    const double r1l2 = r1l * r1l;
    const double s1s1 = s1 * s1;
    return r1k2 * r1k * r1l2 * r1l          //
           + s1 * sl * r1k2 * r1k * r1l      //
           + s1 * sk * r1k * r1l2 * r1l      //
           - 3.0 * s1 * r1k2 * r1l2 * rkl    //
           - s1s1 * sl * r1k2 * rkl          //
           - s1s1 * sk * r1l2 * rkl          //
           + 2.0 * s1s1 * r1k * r1l * rkl * rkl  //
           - s1s1 * sk * sl * r1k * r1l      //
           + s1s1 * s1 * sk * sl * rkl;
}

/// `sigma` is the covariance of (hub, target_1, ..., target_{K-1}).
inline HMatrix build_h_matrix(const Matrix& sigma) {
    const Eigen::Index k = sigma.rows();
    if (sigma.cols() != k || k < 2) fail(ErrorKind::ShapeError, "covariance must be square with at least 2 genes");
    const double s1 = sigma(0, 0);
    if (!(s1 > 0.0)) fail(ErrorKind::ZeroVariance, "hub variance is not positive");

    const Eigen::Index m = k - 1;
    Vector w(m);
    for (Eigen::Index a = 0; a < m; ++a) {
        const double sa = sigma(a + 1, a + 1);
        const double r = sigma(0, a + 1);
        if (!(sa > 0.0)) fail(ErrorKind::ZeroVariance, "target variance is not positive");
        if (r * r >= (1.0 - kDegeneracyTolerance) * s1 * sa)
            fail(ErrorKind::DegenerateCorrelation, "hub and target are perfectly correlated");
        w(a) = std::sqrt((s1 * sa + r * r)) * (s1 * sa - r * r);
    }

    HMatrix out;
    out.h = Matrix::Identity(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = a + 1; b < m; ++b) {
            const double sa = sigma(a + 1, a + 1), sb = sigma(b + 1, b + 1);
            const double ra = sigma(0, a + 1), rb = sigma(0, b + 1), rab = sigma(a + 1, b + 1);
            const double hab = score_cross_moment(s1, sa, sb, ra, rb, rab);
            const double hba = score_cross_moment(s1, sb, sa, rb, ra, rab);
            if (std::abs(hab - hba) > 1e-10 * std::max({1.0, std::abs(hab), std::abs(hba)}))
                fail(ErrorKind::ValidationError, "cross-moment polynomial is not symmetric");
            out.h(a, b) = out.h(b, a) = hab / (w(a) * w(b));
        }
    }

    Eigen::SelfAdjointEigenSolver<Matrix> eig(out.h, Eigen::EigenvaluesOnly);
    out.eigenvalues = eig.eigenvalues().reverse();
    out.positive_definite = out.eigenvalues(m - 1) > kPositiveDefiniteTolerance;
    return out;
}

/// Monte-Carlo upper tail of sum_k lambda_k chi2_P at d, each summand
/// Gamma(shape P/2, scale 2 lambda_k). Returns (hits + 1) / (draws + 1).
inline double gamma_sum_pvalue(double d, std::span<const double> eigenvalues, int p, std::size_t draws,
                               std::uint64_t seed, unsigned threads = 1) {
    if (eigenvalues.empty()) fail(ErrorKind::EmptyTargets, "no eigenvalues");
    if (p < 1) fail(ErrorKind::ValidationError, "degrees of freedom must be positive");
    if (draws < kMinGammaSumDraws) fail(ErrorKind::ValidationError, "at least 100000 Monte-Carlo draws are required");
    for (double l : eigenvalues)
        if (!(l > 0.0)) fail(ErrorKind::NotPositiveDefinite, "eigenvalues must be positive");

    constexpr std::size_t kBlock = 1u << 16;
    const std::size_t blocks = (draws + kBlock - 1) / kBlock;
    std::vector<std::size_t> hits(blocks, 0);
    parallel_for(blocks, threads, [&](std::size_t b) {
        auto eng = rng::make_stream(seed, rng::StreamTag::GammaSum, b);
        rng::NormalSampler normal;
        const std::size_t end = std::min(draws, (b + 1) * kBlock);
        std::size_t count = 0;
        for (std::size_t i = b * kBlock; i < end; ++i) {
            double total = 0.0;
            for (double l : eigenvalues) total += l * rng::chi_square(eng, normal, p);
            if (total >= d) ++count;
        }
        hits[b] = count;
    });
    const std::size_t total_hits = std::accumulate(hits.begin(), hits.end(), std::size_t{0});
    return (static_cast<double>(total_hits) + 1.0) / (static_cast<double>(draws) + 1.0);
}

inline double gamma_sum_pvalue(double d, const Vector& eigenvalues, int p, std::size_t draws, std::uint64_t seed,
                               unsigned threads = 1) {
    return gamma_sum_pvalue(d, std::span<const double>(eigenvalues.data(), static_cast<std::size_t>(eigenvalues.size())),
                            p, draws, seed, threads);
}

/// Null-MLE covariance (1/N) U'U of selected residual columns.
inline Matrix residual_covariance(const Matrix& residuals, std::span<const Eigen::Index> columns) {
    const Eigen::Index n = residuals.rows();
    Matrix sub(n, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = residuals.col(columns[j]);
    return (sub.transpose() * sub) / static_cast<double>(n);
}

/// Score vectors of the hub against each target; these do not change under
/// permutation of X, so they are computed once.
inline std::vector<FVector> hub_score_vectors(const Matrix& residuals, Eigen::Index hub,
                                              std::span<const Eigen::Index> targets) {
    std::vector<FVector> out;
    out.reserve(targets.size());
    for (Eigen::Index t : targets) {
        const auto mles = null_mles(residuals.col(hub), residuals.col(t));
        out.push_back(f_vector(residuals.col(hub), residuals.col(t), mles));
    }
    return out;
}

/// d for score vectors against the basis with rows reordered by `perm`
/// (row i of the permuted basis is row perm[i] of the original).
inline double permuted_hub_statistic(const std::vector<FVector>& scores, const CovariateBasis& basis,
                                     const std::vector<std::size_t>& perm) {
    const Eigen::Index n = basis.basis.rows();
    const Eigen::Index p = basis.basis.cols();
    Matrix permuted(n, p);
    for (Eigen::Index i = 0; i < n; ++i) permuted.row(i) = basis.basis.row(static_cast<Eigen::Index>(perm[i]));
    double d = 0.0;
    for (const auto& f : scores) d += (permuted.transpose() * f.values).squaredNorm();
    return d;
}

/// Sequential permutation test: permute rows of X in batches until the
/// number of permuted statistics >= the observed one reaches the threshold,
/// or max_perm is reached. Permutation b always draws from stream b.
inline PermutationResult permutation_test(const std::vector<FVector>& scores, const CovariateBasis& basis,
                                          const PermutationOptions& opts) {
    opts.validate();
    if (scores.empty()) fail(ErrorKind::EmptyTargets, "no targets to permute against");
    const auto n = static_cast<std::size_t>(basis.basis.rows());

    PermutationResult out;
    for (const auto& f : scores) out.observed_d += score_statistic(f, basis);

    std::size_t done = 0;
    std::vector<double> batch_d;
    while (done < opts.max_perm) {
        const std::size_t want = done == 0 ? opts.min_perm : opts.batch;
        const std::size_t size = std::min(want, opts.max_perm - done);
        batch_d.assign(size, 0.0);
        parallel_for(size, opts.threads, [&](std::size_t j) {
            auto eng = rng::make_stream(opts.seed, rng::StreamTag::Permutation, done + j);
            const auto perm = rng::random_permutation(eng, n);
            batch_d[j] = permuted_hub_statistic(scores, basis, perm);
        });
        for (double db : batch_d) {
            if (!std::isfinite(db)) {
                ++out.degenerate;
                continue;
            }
            ++out.permutations_used;
            if (db >= out.observed_d) ++out.exceedances;
        }
        done += size;
        if (done >= opts.min_perm && out.exceedances >= opts.exceed_threshold) break;
    }
    if (static_cast<double>(out.degenerate) > 0.01 * static_cast<double>(done))
        fail(ErrorKind::PermutationDegeneracy, "more than 1% of permutations were degenerate");
    out.p = (static_cast<double>(out.exceedances) + 1.0) / (static_cast<double>(out.permutations_used) + 1.0);
    return out;
}

/// Full-data entry point: residuals are computed once from the unpermuted
/// mean design; only the variance covariates are permuted.
inline PermutationResult permutation_test(const DataMatrix& y, const MeanCovariates& z, const VarianceCovariates& x,
                                          const HubSpec& spec, const PermutationOptions& opts) {
    spec.validate();
    if (y.samples() != x.rows()) fail(ErrorKind::ShapeError, "expression and covariates differ in sample count");
    const auto hub = y.gene_index(spec.hub);
    if (!hub) fail(ErrorKind::ValidationError, "hub gene '" + spec.hub + "' not found");
    std::vector<Eigen::Index> targets;
    for (const auto& t : spec.targets) {
        const auto idx = y.gene_index(t);
        if (!idx) fail(ErrorKind::ValidationError, "target gene '" + t + "' not found");
        targets.push_back(*idx);
    }
    const ResidualMatrix u = ols_residuals(y, z);
    return permutation_test(hub_score_vectors(u.values, *hub, targets), orthonormalize(x), opts);
}

struct AnalyticOptions {
    bool enabled = true;
    std::size_t draws = 1'000'000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// d, per-target q and (when K-1 < N and H is positive definite) the
/// gamma-sum p-value for one hub.
inline HubResult analyze_hub(const ResidualMatrix& u, const CovariateBasis& basis, Eigen::Index hub,
                             std::span<const Eigen::Index> targets, const AnalyticOptions& opts) {
    if (targets.empty()) fail(ErrorKind::EmptyTargets, "hub has no targets");
    HubResult r;
    r.hub = u.gene_ids[static_cast<std::size_t>(hub)];
    const auto scores = hub_score_vectors(u.values, hub, targets);
    for (std::size_t k = 0; k < targets.size(); ++k) {
        r.targets.push_back(u.gene_ids[static_cast<std::size_t>(targets[k])]);
        r.per_target_q.push_back(score_statistic(scores[k], basis));
    }
    const auto stat = hub_statistic(r.per_target_q);
    r.d = stat.d;
    r.mean_q = stat.mean_q;

    if (!opts.enabled) return r;
    if (static_cast<Eigen::Index>(targets.size()) >= u.samples()) {
        r.status = "analytic_skipped:targets>=samples";
        return r;
    }
    std::vector<Eigen::Index> cols{hub};
    cols.insert(cols.end(), targets.begin(), targets.end());
    const HMatrix h = build_h_matrix(residual_covariance(u.values, cols));
    r.eigenvalues = h.eigenvalues;
    if (!h.positive_definite) {
        r.status = "analytic_skipped:not_positive_definite";
        return r;
    }
    r.p_analytic = gamma_sum_pvalue(r.d, h.eigenvalues, static_cast<int>(basis.basis.cols()), opts.draws, opts.seed,
                                    opts.threads);
    return r;
}

/// Indices of the `top` hubs with the largest mean q, ties broken by hub id.
/// Hubs whose mean q is not finite are never selected.
inline std::vector<std::size_t> screen_hubs(const std::vector<HubResult>& results, std::size_t top) {
    if (results.empty()) fail(ErrorKind::ValidationError, "no hub results to screen");
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < results.size(); ++i)
        if (std::isfinite(results[i].mean_q)) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (results[a].mean_q != results[b].mean_q) return results[a].mean_q > results[b].mean_q;
        return results[a].hub < results[b].hub;
    });
    if (order.size() > top) order.resize(top);
    return order;
}

}  // namespace dyncov
