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

// Calibration and power studies for the pairwise score test.
//
// One study draws X ~ N(0, I_P) once, then generates Y `replicates` times
// from the bivariate normal with mean b0 + beta * sum_p x_ip and a
// per-sample correlation rho(x_i). Each replicate owns its own random
// stream, so a study gives the same report for any thread count.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dyncov/core_stats.hpp"
#include "dyncov/errors.hpp"
#include "dyncov/parallel.hpp"
#include "dyncov/random.hpp"
#include "dyncov/score.hpp"
#include "dyncov/types.hpp"

namespace dyncov {

enum class RhoLink { Constant, Tanh, Quadratic };

inline std::string_view to_string(RhoLink link) {
    switch (link) {
        case RhoLink::Constant: return "constant";
        case RhoLink::Tanh: return "tanh";
        case RhoLink::Quadratic: return "quadratic";
    }
    return "unknown";
}

inline RhoLink parse_link(std::string_view name) {
    if (name == "constant") return RhoLink::Constant;
    if (name == "tanh") return RhoLink::Tanh;
    if (name == "quadratic") return RhoLink::Quadratic;
    fail(ErrorKind::UsageError, "unknown correlation link '" + std::string(name) + "'");
}

inline constexpr double kQuadraticOffset = -0.1;
inline constexpr double kQuadraticShift = 0.99;

/// (e^a - 1) / (e^a + 1) = tanh(a / 2), a = alpha0 + x'alpha.
inline double rho_tanh(VectorCRef x, VectorCRef alpha, double alpha0) {
    if (x.size() != alpha.size()) fail(ErrorKind::ShapeError, "covariate row and alpha differ in length");
    const double a = alpha0 + x.dot(alpha);
    if (a > 40.0) return std::nextafter(1.0, 0.0);
    if (a < -40.0) return std::nextafter(-1.0, 0.0);
    return std::tanh(0.5 * a);
}

inline double rho_quadratic(VectorCRef x, VectorCRef alpha, double offset = kQuadraticOffset) {
    if (x.size() != alpha.size()) fail(ErrorKind::ShapeError, "covariate row and alpha differ in length");
    const double t = offset + x.dot(alpha);
    const double rho = t * t - kQuadraticShift;
    if (!(std::abs(rho) < 1.0)) fail(ErrorKind::InvalidCorrelation, "quadratic link left (-1, 1)");
    return rho;
}

/// Two correlated normal columns with covariance [[s1^2, rho_i], [rho_i, s2^2]]
/// per sample and means z_i'beta1, z_i'beta2.
template <class Engine>
Matrix sample_pair_values(Engine& eng, VectorCRef rho, double sigma1, double sigma2, const Matrix& z,
                          VectorCRef beta1, VectorCRef beta2) {
    const Eigen::Index n = rho.size();
    if (z.rows() != n || z.cols() != beta1.size() || z.cols() != beta2.size())
        fail(ErrorKind::ShapeError, "mean design and coefficients do not conform");
    if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) fail(ErrorKind::ValidationError, "standard deviations must be positive");
    rng::NormalSampler normal;
    Matrix y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double c = rho(i) / (sigma1 * sigma2);
        if (!(std::abs(c) < 1.0)) fail(ErrorKind::InvalidCorrelation, "per-sample correlation outside (-1, 1)");
        const double e1 = normal(eng);
        const double e2 = normal(eng);
        y(i, 0) = sigma1 * e1;
        y(i, 1) = sigma2 * (c * e1 + std::sqrt(1.0 - c * c) * e2);
    }
    y.col(0) += z * beta1;
    y.col(1) += z * beta2;
    return y;
}

inline DataMatrix sample_pair(Eigen::Index n, VectorCRef rho, double sigma1, double sigma2, const Matrix& z,
                              VectorCRef beta1, VectorCRef beta2, std::uint64_t seed) {
    if (rho.size() != n) fail(ErrorKind::ShapeError, "correlation vector length differs from N");
    auto eng = rng::make_stream(seed, rng::StreamTag::Dataset, 0);
    Matrix values = sample_pair_values(eng, rho, sigma1, sigma2, z, beta1, beta2);
    return DataMatrix(std::move(values), {"gene1", "gene2"}, [&] {
        std::vector<std::string> ids;
        for (Eigen::Index i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i + 1));
        return ids;
    }());
}

struct SimulationSpec {
    Eigen::Index n = 70;
    int p = 1;
    RhoLink link = RhoLink::Constant;
    std::vector<double> alpha{0.0};
    double alpha0 = 0.0;
    // Constant link only: fixed correlation, or a fresh U(-1, 1) draw per replicate.
    std::optional<double> constant_rho;
    double beta = 0.0;
    double b0 = 0.0;
    double sigma1 = 1.0;
    double sigma2 = 1.0;
    std::size_t replicates = 1000;
    double nominal_level = 0.05;
    bool correction = false;
    std::size_t max_covariate_draws = 1000;
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 3) fail(ErrorKind::UsageError, "n must be at least 3");
        if (p < 1 || p + 2 > n) fail(ErrorKind::UsageError, "p must satisfy 1 <= p < n - 1");
        if (static_cast<int>(alpha.size()) != p) fail(ErrorKind::UsageError, "alpha must have p entries");
        if (replicates < 1) fail(ErrorKind::UsageError, "replicates must be at least 1");
        if (!(nominal_level > 0.0 && nominal_level < 1.0)) fail(ErrorKind::UsageError, "nominal_level must be in (0, 1)");
        if (!(sigma1 > 0.0 && sigma2 > 0.0)) fail(ErrorKind::UsageError, "sigma1 and sigma2 must be positive");
        if (constant_rho && !(std::abs(*constant_rho) < sigma1 * sigma2))
            fail(ErrorKind::UsageError, "constant_rho must satisfy |rho| < sigma1 * sigma2");
        if (max_covariate_draws < 1) fail(ErrorKind::UsageError, "max_covariate_draws must be positive");
    }
};

struct PowerReport {
    SimulationSpec spec;
    std::size_t rejections = 0;
    double rejection_rate = 0.0;
    double mc_stderr = 0.0;
    std::optional<std::size_t> adjusted_rejections;
    std::optional<double> adjusted_rate;
    std::size_t covariate_resamples = 0;
};

/// Correlation per sample under the study link (a covariance when sigma != 1).
inline Vector link_correlations(const SimulationSpec& spec, const Matrix& x) {
    const Eigen::Map<const Vector> alpha(spec.alpha.data(), static_cast<Eigen::Index>(spec.alpha.size()));
    const double scale = spec.sigma1 * spec.sigma2;
    Vector rho(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Vector xi = x.row(i).transpose();
        switch (spec.link) {
            case RhoLink::Constant: rho(i) = spec.constant_rho.value_or(0.0); break;
            case RhoLink::Tanh: rho(i) = scale * rho_tanh(xi, alpha, spec.alpha0); break;
            case RhoLink::Quadratic: rho(i) = scale * rho_quadratic(xi, alpha); break;
        }
    }
    return rho;
}

struct StudyDesign {
    Matrix x;
    Vector rho;
    std::size_t resamples = 0;
};

/// Draws X until every per-sample correlation is valid.
inline StudyDesign draw_design(const SimulationSpec& spec) {
    for (std::size_t attempt = 0; attempt < spec.max_covariate_draws; ++attempt) {
        auto eng = rng::make_stream(spec.seed, rng::StreamTag::Covariates, attempt);
        rng::NormalSampler normal;
        Matrix x(spec.n, spec.p);
        for (Eigen::Index i = 0; i < spec.n; ++i)
            for (int j = 0; j < spec.p; ++j) x(i, j) = normal(eng);
        try {
            Vector rho = link_correlations(spec, x);
            return StudyDesign{std::move(x), std::move(rho), attempt};
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::InvalidCorrelation) throw;
        }
    }
    fail(ErrorKind::InvalidCorrelation, "no covariate draw produced valid correlations");
}

inline PowerReport run_study(const SimulationSpec& spec, unsigned threads = 1) {
    spec.validate();
    const StudyDesign design = draw_design(spec);
    const Matrix z = MeanCovariates::with_intercept(design.x).matrix();
    const CovariateBasis basis = orthonormalize(design.x);
    std::optional<HondaCoefficients> coeffs;
    if (spec.correction) coeffs = honda_coefficients(basis, spec.n, spec.p);

    Vector beta(z.cols());
    beta(0) = spec.b0;
    beta.tail(spec.p).setConstant(spec.beta);

    std::vector<char> reject(spec.replicates, 0);
    std::vector<char> reject_adjusted(spec.replicates, 0);
    parallel_for(spec.replicates, threads, [&](std::size_t r) {
        auto eng = rng::make_stream(spec.seed, rng::StreamTag::Replicate, r);
        Vector rho = design.rho;
        if (spec.link == RhoLink::Constant && !spec.constant_rho) {
            double c;
            do c = 2.0 * rng::uniform_open(eng) - 1.0;
            while (c == -1.0);
            rho.setConstant(c * spec.sigma1 * spec.sigma2);
        }
        const Matrix y = sample_pair_values(eng, rho, spec.sigma1, spec.sigma2, z, beta, beta);
        const Matrix u = residualize(y, z);
        const auto res = pairwise_score(u.col(0), u.col(1), basis, coeffs ? &*coeffs : nullptr);
        reject[r] = res.p_asymptotic < spec.nominal_level;
        if (res.p_adjusted) reject_adjusted[r] = *res.p_adjusted < spec.nominal_level;
    });

    PowerReport out;
    out.spec = spec;
    out.covariate_resamples = design.resamples;
    for (char c : reject) out.rejections += c != 0;
    const double reps = static_cast<double>(spec.replicates);
    out.rejection_rate = static_cast<double>(out.rejections) / reps;
    out.mc_stderr = std::sqrt(out.rejection_rate * (1.0 - out.rejection_rate) / reps);
    if (spec.correction) {
        std::size_t adj = 0;
        for (char c : reject_adjusted) adj += c != 0;
        out.adjusted_rejections = adj;
        out.adjusted_rate = static_cast<double>(adj) / reps;
    }
    return out;
}

// Study grids read from "key = value" files. A grid crosses every listed
// beta with every (link, alpha) column, e.g.
//
//   n = 70
//   replicates = 1000
//   seed = 7
//   betas = 0, 1
//   tanh = 0, 0.25, 0.5, 0.75, 1
//   quadratic = 0.2, 0.3, 0.4, 0.5

struct GridColumn {
    RhoLink link = RhoLink::Constant;
    double alpha = 0.0;
};

struct StudyGrid {
    SimulationSpec base;
    std::vector<double> betas{0.0};
    std::vector<GridColumn> columns;
    std::map<std::string, std::string> entries;  // as read, for report headers
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view s, const std::string& key) {
    s = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
        fail(ErrorKind::UsageError, "invalid number '" + std::string(s) + "' for " + key);
    return v;
}

inline std::uint64_t parse_unsigned(std::string_view s, const std::string& key) {
    s = trim(s);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        fail(ErrorKind::UsageError, "invalid integer '" + std::string(s) + "' for " + key);
    return v;
}

inline std::vector<double> parse_double_list(std::string_view s, const std::string& key) {
    std::vector<double> out;
    while (true) {
        const auto comma = s.find(',');
        out.push_back(parse_double(s.substr(0, comma), key));
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

inline bool parse_bool(std::string_view s, const std::string& key) {
    s = trim(s);
    if (s == "true" || s == "1" || s == "yes" || s == "honda") return true;
    if (s == "false" || s == "0" || s == "no" || s == "none") return false;
    fail(ErrorKind::UsageError, "invalid flag '" + std::string(s) + "' for " + key);
}

}  // namespace detail

inline StudyGrid parse_study_config(std::istream& in) {
    StudyGrid g;
    std::optional<RhoLink> single_link;
    std::optional<std::vector<double>> single_alpha;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string_view body = detail::trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos)
            fail(ErrorKind::UsageError, "config line " + std::to_string(lineno) + " is not 'key = value'");
        const std::string key(detail::trim(body.substr(0, eq)));
        const std::string_view value = detail::trim(body.substr(eq + 1));
        if (g.entries.count(key)) fail(ErrorKind::UsageError, "config key '" + key + "' repeated");
        g.entries[key] = std::string(value);

        auto& s = g.base;
        if (key == "n") s.n = static_cast<Eigen::Index>(detail::parse_unsigned(value, key));
        else if (key == "p") s.p = static_cast<int>(detail::parse_unsigned(value, key));
        else if (key == "link") single_link = parse_link(value);
        else if (key == "alpha") single_alpha = detail::parse_double_list(value, key);
        else if (key == "alpha0") s.alpha0 = detail::parse_double(value, key);
        else if (key == "constant_rho") s.constant_rho = detail::parse_double(value, key);
        else if (key == "beta") g.betas = {detail::parse_double(value, key)};
        else if (key == "betas") g.betas = detail::parse_double_list(value, key);
        else if (key == "b0") s.b0 = detail::parse_double(value, key);
        else if (key == "sigma1") s.sigma1 = detail::parse_double(value, key);
        else if (key == "sigma2") s.sigma2 = detail::parse_double(value, key);
        else if (key == "replicates") s.replicates = detail::parse_unsigned(value, key);
        else if (key == "nominal_level") s.nominal_level = detail::parse_double(value, key);
        else if (key == "correction") s.correction = detail::parse_bool(value, key);
        else if (key == "max_covariate_draws") s.max_covariate_draws = detail::parse_unsigned(value, key);
        else if (key == "seed") s.seed = detail::parse_unsigned(value, key);
        else if (key == "constant" || key == "tanh" || key == "quadratic") {
            for (double a : detail::parse_double_list(value, key)) g.columns.push_back({parse_link(key), a});
        } else {
            fail(ErrorKind::UsageError, "unknown config key '" + key + "'");
        }
    }
    if (single_link || single_alpha) {
        if (!g.columns.empty()) fail(ErrorKind::UsageError, "use either link/alpha or per-link alpha lists");
        g.base.link = single_link.value_or(RhoLink::Constant);
        g.base.alpha = single_alpha.value_or(std::vector<double>(static_cast<std::size_t>(g.base.p), 0.0));
    } else if (g.columns.empty()) {
        g.base.alpha.assign(static_cast<std::size_t>(g.base.p), 0.0);
    }
    return g;
}

inline StudyGrid load_study_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::IoError, "cannot open config '" + path + "'");
    return parse_study_config(in);
}

/// Specs of the grid, beta-major. Grid columns set every entry of alpha to
/// the listed value.
inline std::vector<SimulationSpec> expand_grid(const StudyGrid& g) {
    std::vector<SimulationSpec> out;
    for (double beta : g.betas) {
        if (g.columns.empty()) {
            SimulationSpec s = g.base;
            s.beta = beta;
            out.push_back(s);
            continue;
        }
        for (const auto& c : g.columns) {
            SimulationSpec s = g.base;
            s.beta = beta;
            s.link = c.link;
            s.alpha.assign(static_cast<std::size_t>(s.p), c.alpha);
            out.push_back(s);
        }
    }
    return out;
}

}  // namespace dyncov
