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

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dyncov/errors.hpp"

namespace dyncov {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using VectorCRef = Eigen::Ref<const Eigen::VectorXd>;
using MatrixCRef = Eigen::Ref<const Eigen::MatrixXd>;

namespace detail {

inline void require_all_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) fail(ErrorKind::ValidationError, std::string(what) + " contains non-finite entries");
}

inline void require_unique(const std::vector<std::string>& ids, ErrorKind kind, const char* what) {
    std::unordered_set<std::string> seen;
    seen.reserve(ids.size());
    for (const auto& id : ids) {
        if (!seen.insert(id).second) fail(kind, std::string("duplicate ") + what + " '" + id + "'");
    }
}

}  // namespace detail

/// Expression values, samples in rows and genes in columns.
class DataMatrix {
  public:
    DataMatrix() = default;

    DataMatrix(Matrix values, std::vector<std::string> gene_ids, std::vector<std::string> sample_ids)
        : values_(std::move(values)), gene_ids_(std::move(gene_ids)), sample_ids_(std::move(sample_ids)) {
        if (values_.rows() < 3) fail(ErrorKind::ShapeError, "at least 3 samples are required");
        if (static_cast<std::size_t>(values_.cols()) != gene_ids_.size())
            fail(ErrorKind::ShapeError, "gene id count does not match matrix columns");
        if (static_cast<std::size_t>(values_.rows()) != sample_ids_.size())
            fail(ErrorKind::ShapeError, "sample id count does not match matrix rows");
        detail::require_all_finite(values_, "expression matrix");
        detail::require_unique(gene_ids_, ErrorKind::DuplicateGene, "gene id");
        detail::require_unique(sample_ids_, ErrorKind::ValidationError, "sample id");
    }

    /// Unnamed matrix; ids default to g0.., s0..
    static DataMatrix from_values(Matrix values) {
        std::vector<std::string> genes, samples;
        for (Eigen::Index j = 0; j < values.cols(); ++j) genes.push_back("g" + std::to_string(j));
        for (Eigen::Index i = 0; i < values.rows(); ++i) samples.push_back("s" + std::to_string(i));
        return DataMatrix(std::move(values), std::move(genes), std::move(samples));
    }

    const Matrix& values() const noexcept { return values_; }
    const std::vector<std::string>& gene_ids() const noexcept { return gene_ids_; }
    const std::vector<std::string>& sample_ids() const noexcept { return sample_ids_; }
    Eigen::Index samples() const noexcept { return values_.rows(); }
    Eigen::Index genes() const noexcept { return values_.cols(); }

    std::optional<Eigen::Index> gene_index(const std::string& id) const {
        for (std::size_t j = 0; j < gene_ids_.size(); ++j)
            if (gene_ids_[j] == id) return static_cast<Eigen::Index>(j);
        return std::nullopt;
    }

  private:
    Matrix values_;
    std::vector<std::string> gene_ids_;
    std::vector<std::string> sample_ids_;
};

/// Mean-model design Z. The intercept is an explicit column.
class MeanCovariates {
  public:
    MeanCovariates() = default;

    explicit MeanCovariates(Matrix z) : z_(std::move(z)) {
        if (z_.cols() < 1) fail(ErrorKind::ShapeError, "mean design needs at least one column");
        if (z_.cols() >= z_.rows()) fail(ErrorKind::ShapeError, "mean design needs fewer columns than samples");
        detail::require_all_finite(z_, "mean design");
    }

    static MeanCovariates intercept_only(Eigen::Index n) { return MeanCovariates(Matrix::Ones(n, 1)); }

    /// [1 | columns]
    static MeanCovariates with_intercept(const Matrix& columns) {
        Matrix z(columns.rows(), columns.cols() + 1);
        z.col(0).setOnes();
        z.rightCols(columns.cols()) = columns;
        return MeanCovariates(std::move(z));
    }

    const Matrix& matrix() const noexcept { return z_; }
    Eigen::Index rows() const noexcept { return z_.rows(); }
    Eigen::Index cols() const noexcept { return z_.cols(); }

  private:
    Matrix z_;
};

/// Variance-model covariates X, without an intercept column.
class VarianceCovariates {
  public:
    VarianceCovariates() = default;

    explicit VarianceCovariates(Matrix x) : x_(std::move(x)) {
        if (x_.cols() < 1) fail(ErrorKind::ShapeError, "variance covariates need at least one column");
        if (x_.cols() >= x_.rows()) fail(ErrorKind::ShapeError, "variance covariates need fewer columns than samples");
        detail::require_all_finite(x_, "variance covariates");
    }

    const Matrix& matrix() const noexcept { return x_; }
    Eigen::Index rows() const noexcept { return x_.rows(); }
    Eigen::Index cols() const noexcept { return x_.cols(); }

  private:
    Matrix x_;
};

/// OLS residuals, one column per gene, in the gene order of the source DataMatrix.
struct ResidualMatrix {
    Matrix values;
    std::vector<std::string> gene_ids;

    Eigen::Index samples() const noexcept { return values.rows(); }
    Eigen::Index genes() const noexcept { return values.cols(); }
};

/// Restricted (alpha = 0) maximum-likelihood estimates for one gene pair.
struct NullMles {
    double sigma1_sq = 1.0;
    double sigma2_sq = 1.0;
    double rho_hat = 0.0;

    double product() const noexcept { return sigma1_sq * sigma2_sq; }
    double correlation() const noexcept { return rho_hat / std::sqrt(product()); }
};

/// Centered, orthonormalized variance covariates.
struct CovariateBasis {
    Matrix basis;      // N x P, columns centered and orthonormal
    Matrix transform;  // P x P, basis = centered(X) * transform
};

struct PreparedCovariates {
    Matrix xc;
    double w = 1.0;
    Matrix transform;
};

}  // namespace dyncov
