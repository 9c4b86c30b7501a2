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

// Residualization, restricted MLEs and covariate preparation shared by the
// pairwise and hub tests.

#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/QR>

#include "dyncov/errors.hpp"
#include "dyncov/types.hpp"

namespace dyncov {

/// Relative rank tolerance for Z and centered X.
inline constexpr double kRankTolerance = 1e-10;

/// rho^2 >= (1 - kDegeneracyTolerance) * s1 * s2 counts as perfect correlation.
inline constexpr double kDegeneracyTolerance = 1e-12;

/// A residual column whose norm is below this fraction of the data column norm
/// is an exact fit and is stored as zeros.
inline constexpr double kExactFitTolerance = 1e-11;

/// Residuals of every column of `y` after projecting out the column space of `z`.
inline Matrix residualize(const Matrix& y, const Matrix& z) {
    if (y.rows() != z.rows()) fail(ErrorKind::ShapeError, "row counts of Y and Z differ");
    Eigen::ColPivHouseholderQR<Matrix> qr(z);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() < z.cols()) fail(ErrorKind::SingularDesign, "mean design Z is rank deficient");

    const Eigen::Index r = z.cols();
    Matrix qty = qr.householderQ().transpose() * y;
    qty.topRows(r).setZero();
    Matrix u = qr.householderQ() * qty;

    for (Eigen::Index g = 0; g < u.cols(); ++g) {
        const double ynorm = y.col(g).norm();
        if (u.col(g).norm() <= kExactFitTolerance * ynorm || ynorm == 0.0) u.col(g).setZero();
    }
    return u;
}

inline ResidualMatrix ols_residuals(const DataMatrix& y, const MeanCovariates& z) {
    if (y.samples() != z.rows()) fail(ErrorKind::ShapeError, "expression and mean design have different sample counts");
    return ResidualMatrix{residualize(y.values(), z.matrix()), y.gene_ids()};
}

inline NullMles null_mles(VectorCRef u1, VectorCRef u2) {
    if (u1.size() != u2.size()) fail(ErrorKind::ShapeError, "residual vectors differ in length");
    if (u1.size() < 3) fail(ErrorKind::ShapeError, "at least 3 samples are required");
    const double n = static_cast<double>(u1.size());

    NullMles m;
    m.sigma1_sq = u1.squaredNorm() / n;
    m.sigma2_sq = u2.squaredNorm() / n;
    m.rho_hat = u1.dot(u2) / n;

    if (!(m.sigma1_sq > 0.0) || !(m.sigma2_sq > 0.0))
        fail(ErrorKind::ZeroVariance, "residual vector has zero variance");
    if (m.rho_hat * m.rho_hat >= (1.0 - kDegeneracyTolerance) * m.product())
        fail(ErrorKind::DegenerateCorrelation, "residuals are perfectly correlated");
    return m;
}

/// Center the columns of `x` and orthonormalize them with Householder QR,
/// flipping signs so the triangular factor has a positive diagonal.
inline CovariateBasis orthonormalize(const Matrix& x) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    if (p < 1 || p >= n) fail(ErrorKind::ShapeError, "variance covariates need 1 <= P < N columns");

    Matrix centered = x.rowwise() - x.colwise().mean();
    const double scale = centered.colwise().norm().maxCoeff();
    if (!(scale > 0.0)) fail(ErrorKind::SingularDesign, "variance covariates are constant");

    Eigen::HouseholderQR<Matrix> qr(centered);
    Matrix r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    Vector signs(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (std::abs(r(j, j)) <= kRankTolerance * scale)
            fail(ErrorKind::SingularDesign, "centered variance covariates are rank deficient");
        signs(j) = r(j, j) < 0.0 ? -1.0 : 1.0;
    }

    CovariateBasis out;
    out.basis = (qr.householderQ() * Matrix::Identity(n, p)) * signs.asDiagonal();
    Matrix r_pos = signs.asDiagonal() * r;
    out.transform = r_pos.triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
    return out;
}

inline CovariateBasis orthonormalize(const VarianceCovariates& x) { return orthonormalize(x.matrix()); }

/// Weight that replaces the intercept constant so the information matrix is
/// block diagonal once X is centered.
inline double intercept_weight(const NullMles& m, Eigen::Index n) {
    const double s = m.product();
    const double r2 = m.rho_hat * m.rho_hat;
    const double denom = (s + r2) * (s - r2);
    return (denom - 4.0 * s * r2 / static_cast<double>(n)) / denom;
}

inline PreparedCovariates prepare_covariates(const VarianceCovariates& x, const NullMles& mles, Eigen::Index n) {
    if (x.rows() != n) fail(ErrorKind::ShapeError, "covariate rows do not match sample count");
    CovariateBasis b = orthonormalize(x);
    return PreparedCovariates{std::move(b.basis), intercept_weight(mles, n), std::move(b.transform)};
}

}  // namespace dyncov
