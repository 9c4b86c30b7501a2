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

// Subcommand drivers behind the dyncov executable. Each returns a
// ResultTable; writing it is left to the caller.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dyncov/core_stats.hpp"
#include "dyncov/errors.hpp"
#include "dyncov/format.hpp"
#include "dyncov/hub.hpp"
#include "dyncov/ingest.hpp"
#include "dyncov/multiple_testing.hpp"
#include "dyncov/parallel.hpp"
#include "dyncov/random.hpp"
#include "dyncov/score.hpp"
#include "dyncov/sim.hpp"

namespace dyncov {

enum class Correction { None, Honda };

struct RunConfig {
    std::string subcommand;
    std::string expr_path;
    std::string covar_path;
    std::vector<std::string> x_cols;
    std::vector<std::string> z_cols;
    std::string tf_map_path;
    bool tf_max_tier = false;
    std::optional<double> tf_min_score;
    std::string pairs_path;
    std::vector<std::string> genes;
    Correction correction = Correction::None;
    std::size_t min_perm = 100;
    std::size_t max_perm = 1'000'000;
    std::size_t batch = 100;
    std::size_t exceed = 2;
    std::size_t mc_draws = 1'000'000;
    bool analytic = true;
    std::optional<std::uint64_t> seed;
    double alpha_level = 0.05;
    std::size_t top = 10;
    std::string config_path;
    std::string in_path;
    std::string p_col = "p";
    std::string out_path;
    unsigned threads = 1;

    void require_seed() const {
        if (!seed) fail(ErrorKind::UsageError, "--seed is required for " + subcommand);
    }

    void validate() const {
        if (!(alpha_level > 0.0 && alpha_level < 1.0)) fail(ErrorKind::UsageError, "--alpha-level must be in (0, 1)");
        if (threads < 1) fail(ErrorKind::UsageError, "--threads must be positive");
        if (subcommand == "pairwise" || subcommand == "hub") {
            if (expr_path.empty()) fail(ErrorKind::UsageError, "--expr is required");
            if (covar_path.empty()) fail(ErrorKind::UsageError, "--covar is required");
            if (x_cols.empty()) fail(ErrorKind::UsageError, "--x-cols is required");
        }
        if (subcommand == "pairwise" && !pairs_path.empty() && !genes.empty())
            fail(ErrorKind::UsageError, "give either --pairs or --genes, not both");
        if (subcommand == "hub") {
            if (tf_map_path.empty()) fail(ErrorKind::UsageError, "--tf-map is required");
            if (min_perm == 0 || max_perm == 0 || batch == 0 || exceed == 0)
                fail(ErrorKind::UsageError, "permutation parameters must be positive");
            if (min_perm > max_perm) fail(ErrorKind::UsageError, "--min-perm exceeds --max-perm");
            if (analytic && mc_draws < kMinGammaSumDraws) fail(ErrorKind::UsageError, "--mc-draws must be at least 100000");
            require_seed();
        }
        if (subcommand == "simulate" && config_path.empty()) fail(ErrorKind::UsageError, "--config is required");
        if (subcommand == "adjust" && in_path.empty()) fail(ErrorKind::UsageError, "--in is required");
    }

    /// Settings echoed into every output header.
    std::vector<std::pair<std::string, std::string>> describe() const {
        auto join = [](const std::vector<std::string>& v) {
            std::string s;
            for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
            return s;
        };
        std::vector<std::pair<std::string, std::string>> d{{"subcommand", subcommand}};
        auto add = [&](std::string k, std::string v) {
            if (!v.empty()) d.emplace_back(std::move(k), std::move(v));
        };
        add("expr", expr_path);
        add("covar", covar_path);
        add("x_cols", join(x_cols));
        add("z_cols", join(z_cols));
        if (subcommand == "pairwise") {
            add("pairs", pairs_path);
            add("genes", join(genes));
            add("correction", correction == Correction::Honda ? "honda" : "none");
        }
        if (subcommand == "hub") {
            add("tf_map", tf_map_path);
            add("tf_max_tier", tf_max_tier ? "true" : "false");
            if (tf_min_score) add("tf_min_score", format_double(*tf_min_score));
            add("min_perm", std::to_string(min_perm));
            add("max_perm", std::to_string(max_perm));
            add("batch", std::to_string(batch));
            add("exceed", std::to_string(exceed));
            add("analytic", analytic ? "on" : "off");
            add("mc_draws", std::to_string(mc_draws));
            add("top", std::to_string(top));
        }
        if (subcommand == "simulate") add("config", config_path);
        if (subcommand == "adjust") {
            add("in", in_path);
            add("p_col", p_col);
        }
        if (seed) add("seed", std::to_string(*seed));
        add("alpha_level", format_double(alpha_level));
        return d;
    }
};

struct ResultTable {
    std::vector<std::string> header;  // comment lines, without the leading '#'
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void write(std::ostream& out) const {
        for (const auto& h : header) out << "# " << h << '\n';
        for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "\t" : "") << columns[j];
        out << '\n';
        for (const auto& r : rows) {
            for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "\t" : "") << r[j];
            out << '\n';
        }
    }

    std::size_t column(std::string_view name) const {
        for (std::size_t j = 0; j < columns.size(); ++j)
            if (columns[j] == name) return j;
        fail(ErrorKind::ValidationError, "no column '" + std::string(name) + "'");
    }
};

namespace detail {

inline ResultTable start_table(const RunConfig& cfg) {
    ResultTable t;
    t.header.push_back("dyncov " + cfg.subcommand);
    for (const auto& [k, v] : cfg.describe()) t.header.push_back(k + " = " + v);
    return t;
}

/// BH over the rows whose p column parses; other rows get NA.
inline void append_bh_column(ResultTable& t, std::size_t p_column, const std::string& name = "p_bh") {
    std::vector<double> ps;
    std::vector<std::size_t> where;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& cell = t.rows[r].at(p_column);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec == std::errc{} && ptr == cell.data() + cell.size() && std::isfinite(v)) {
            ps.push_back(v);
            where.push_back(r);
        }
    }
    const auto adj = bh_adjust(ps);
    t.columns.push_back(name);
    for (auto& row : t.rows) row.push_back("NA");
    for (std::size_t k = 0; k < where.size(); ++k) t.rows[where[k]].back() = format_double(adj[k]);
}

/// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t stable_hash(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001B3ull;
    return h;
}

inline std::unordered_map<std::string, Eigen::Index> gene_lookup(const std::vector<std::string>& ids) {
    std::unordered_map<std::string, Eigen::Index> m;
    for (std::size_t j = 0; j < ids.size(); ++j) m.emplace(ids[j], static_cast<Eigen::Index>(j));
    return m;
}

inline std::vector<bool> zero_variance_columns(const Matrix& u) {
    std::vector<bool> out(static_cast<std::size_t>(u.cols()));
    for (Eigen::Index g = 0; g < u.cols(); ++g) out[static_cast<std::size_t>(g)] = u.col(g).squaredNorm() == 0.0;
    return out;
}

inline AlignedDataset load_dataset(const RunConfig& cfg, ResultTable& t) {
    auto data = align(parse_expression(cfg.expr_path), parse_covariates(cfg.covar_path), cfg.x_cols, cfg.z_cols);
    t.header.push_back("samples = " + std::to_string(data.y.samples()));
    t.header.push_back("genes = " + std::to_string(data.y.genes()));
    if (data.dropped_expression_samples)
        t.header.push_back("warning: " + std::to_string(data.dropped_expression_samples) +
                           " expression samples without covariates were dropped");
    if (data.dropped_covariate_samples)
        t.header.push_back("warning: " + std::to_string(data.dropped_covariate_samples) +
                           " covariate samples without expression were dropped");
    return data;
}

inline std::vector<std::pair<std::string, std::string>> read_pairs(const std::string& path) {
    const std::string content = read_file(path);
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& line : content_lines(content)) {
        const auto cells = split_tabs(line.text);
        if (cells.size() != 2 || cells[0].empty() || cells[1].empty())
            throw MalformedInput(line.number, 1, "expected two gene ids");
        out.emplace_back(std::string(cells[0]), std::string(cells[1]));
    }
    if (out.empty()) fail(ErrorKind::EmptyFile, "pair file has no pairs");
    return out;
}

}  // namespace detail

inline ResultTable cmd_pairwise(const RunConfig& cfg) {
    cfg.validate();
    ResultTable t = detail::start_table(cfg);
    const AlignedDataset data = detail::load_dataset(cfg, t);
    const ResidualMatrix u = ols_residuals(data.y, data.z);
    const CovariateBasis basis = orthonormalize(data.x);
    std::optional<HondaCoefficients> coeffs;
    if (cfg.correction == Correction::Honda) coeffs = honda_coefficients(basis, data.x.rows(), static_cast<int>(data.x.cols()));
    const auto index = detail::gene_lookup(u.gene_ids);

    std::vector<std::pair<std::string, std::string>> pairs;
    if (!cfg.pairs_path.empty()) {
        pairs = detail::read_pairs(cfg.pairs_path);
    } else {
        const std::vector<std::string>& genes = cfg.genes.empty() ? u.gene_ids : cfg.genes;
        for (std::size_t a = 0; a < genes.size(); ++a)
            for (std::size_t b = a + 1; b < genes.size(); ++b) pairs.emplace_back(genes[a], genes[b]);
    }
    if (pairs.empty()) fail(ErrorKind::ValidationError, "no gene pairs to test");

    const auto zero_var = detail::zero_variance_columns(u.values);
    t.columns = {"gene_a", "gene_b", "q", "df", "p", "q_adjusted", "p_adjusted", "status"};
    t.rows.assign(pairs.size(), {});
    parallel_for(pairs.size(), cfg.threads, [&](std::size_t k) {
        const auto& [a, b] = pairs[k];
        auto& row = t.rows[k];
        row = {a, b, "NA", std::to_string(data.x.cols()), "NA", "NA", "NA", "ok"};
        const auto ia = index.find(a);
        const auto ib = index.find(b);
        if (ia == index.end() || ib == index.end()) {
            row[7] = "gene_missing";
            return;
        }
        if (ia->second == ib->second) {
            row[7] = "same_gene";
            return;
        }
        if (zero_var[static_cast<std::size_t>(ia->second)] || zero_var[static_cast<std::size_t>(ib->second)]) {
            row[7] = std::string(to_string(ErrorKind::ZeroVariance));
            return;
        }
        try {
            const auto r = pairwise_score(u.values.col(ia->second), u.values.col(ib->second), basis,
                                          coeffs ? &*coeffs : nullptr);
            row[2] = format_double(r.q);
            row[4] = format_double(r.p_asymptotic);
            row[5] = format_optional(r.q_adjusted);
            row[6] = format_optional(r.p_adjusted);
        } catch (const Error& e) {
            row[7] = std::string(to_string(e.kind()));
        }
    });
    detail::append_bh_column(t, cfg.correction == Correction::Honda ? 6 : 4);
    return t;
}

struct HubRunSummary {
    std::size_t hubs = 0;
    std::size_t permuted = 0;
    double mean_of_mean_q = 0.0;
};

inline ResultTable cmd_hub(const RunConfig& cfg, HubRunSummary* summary = nullptr) {
    cfg.validate();
    ResultTable t = detail::start_table(cfg);
    const AlignedDataset data = detail::load_dataset(cfg, t);
    TfTargetMap tf = parse_tf_targets(cfg.tf_map_path);
    tf = filter_tf_targets(tf, TfFilter{cfg.tf_max_tier, cfg.tf_min_score});
    if (tf.self_edges_dropped)
        t.header.push_back("warning: " + std::to_string(tf.self_edges_dropped) + " self-edges dropped");
    if (tf.duplicate_edges_dropped)
        t.header.push_back("warning: " + std::to_string(tf.duplicate_edges_dropped) + " duplicate edges dropped");

    const ResidualMatrix u = ols_residuals(data.y, data.z);
    const CovariateBasis basis = orthonormalize(data.x);
    const auto index = detail::gene_lookup(u.gene_ids);
    const auto zero_var = detail::zero_variance_columns(u.values);
    const std::uint64_t seed = *cfg.seed;

    struct HubRow {
        HubResult result;
        std::size_t missing = 0;
        std::optional<Eigen::Index> hub_index;
        std::vector<Eigen::Index> targets;
    };
    std::vector<HubRow> rows(tf.tfs.size());
    parallel_for(rows.size(), cfg.threads, [&](std::size_t k) {
        HubRow& row = rows[k];
        const std::string& hub = tf.tfs[k];
        row.result.hub = hub;
        row.result.mean_q = std::numeric_limits<double>::quiet_NaN();
        const auto h = index.find(hub);
        if (h == index.end()) {
            row.result.status = "hub_missing";
            return;
        }
        if (zero_var[static_cast<std::size_t>(h->second)]) {
            row.result.status = std::string(to_string(ErrorKind::ZeroVariance));
            return;
        }
        row.hub_index = h->second;
        for (const auto& target : tf.targets(hub)) {
            const auto it = index.find(target);
            if (it == index.end() || zero_var[static_cast<std::size_t>(it->second)]) {
                ++row.missing;
                continue;
            }
            row.targets.push_back(it->second);
        }
        if (row.targets.empty()) {
            row.result.status = std::string(to_string(ErrorKind::EmptyTargets));
            return;
        }
        try {
            AnalyticOptions opts{cfg.analytic, cfg.mc_draws,
                                 rng::derive_seed(seed, detail::stable_hash(hub)), 1};
            row.result = analyze_hub(u, basis, h->second, row.targets, opts);
        } catch (const Error& e) {
            row.result.hub = hub;
            row.result.mean_q = std::numeric_limits<double>::quiet_NaN();
            row.result.status = std::string(to_string(e.kind()));
        }
    });

    std::vector<HubResult> results;
    for (const auto& r : rows) results.push_back(r.result);
    std::vector<std::size_t> permute;
    std::vector<std::size_t> rank(rows.size(), 0);
    bool any_ok = false;
    for (const auto& r : results) any_ok = any_ok || std::isfinite(r.mean_q);
    if (any_ok) {
        const auto order = screen_hubs(results, cfg.top == 0 ? results.size() : cfg.top);
        for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = k + 1;
        permute = order;
    }
    for (std::size_t k = 0; k < results.size(); ++k)
        if (cfg.analytic && !rank[k] && std::isfinite(results[k].mean_q) && !results[k].p_analytic)
            permute.push_back(k);

    for (std::size_t k : permute) {
        HubRow& row = rows[k];
        PermutationOptions opts;
        opts.min_perm = cfg.min_perm;
        opts.batch = cfg.batch;
        opts.max_perm = cfg.max_perm;
        opts.exceed_threshold = cfg.exceed;
        opts.seed = rng::derive_seed(seed ^ 0x5045524Dull, detail::stable_hash(row.result.hub));
        opts.threads = cfg.threads;
        try {
            const auto scores = hub_score_vectors(u.values, *row.hub_index, row.targets);
            const auto perm = permutation_test(scores, basis, opts);
            row.result.p_permutation = perm.p;
            row.result.permutations_used = perm.permutations_used;
        } catch (const Error& e) {
            row.result.status = std::string(to_string(e.kind()));
        }
    }

    t.columns = {"hub",     "J",         "d",           "mean_q",           "lambda_min",
                 "lambda_max", "p_analytic", "p_permutation", "permutations_used", "p",
                 "method",  "screen_rank", "missing_targets", "status"};
    double mean_sum = 0.0;
    std::size_t ok = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const HubResult& r = rows[k].result;
        const bool scored = std::isfinite(r.mean_q);
        if (scored) {
            mean_sum += r.mean_q;
            ++ok;
        }
        std::optional<double> p = r.p_permutation ? r.p_permutation : r.p_analytic;
        const std::string method = r.p_permutation ? "permutation" : (r.p_analytic ? "gamma_sum" : "none");
        t.rows.push_back({r.hub,
                          scored ? std::to_string(r.per_target_q.size()) : "NA",
                          scored ? format_double(r.d) : "NA",
                          scored ? format_double(r.mean_q) : "NA",
                          r.eigenvalues ? format_double(r.eigenvalues->minCoeff()) : "NA",
                          r.eigenvalues ? format_double(r.eigenvalues->maxCoeff()) : "NA",
                          format_optional(r.p_analytic),
                          format_optional(r.p_permutation),
                          std::to_string(r.permutations_used),
                          format_optional(p),
                          method,
                          rank[k] ? std::to_string(rank[k]) : "NA",
                          std::to_string(rows[k].missing),
                          r.status});
    }
    detail::append_bh_column(t, t.column("p"));
    if (summary) {
        summary->hubs = ok;
        summary->permuted = 0;
        for (const auto& r : rows) summary->permuted += r.result.p_permutation.has_value();
        summary->mean_of_mean_q = ok ? mean_sum / static_cast<double>(ok) : 0.0;
    }
    return t;
}

inline ResultTable cmd_simulate(const RunConfig& cfg) {
    cfg.validate();
    StudyGrid grid = load_study_config(cfg.config_path);
    if (cfg.seed) {
        grid.base.seed = *cfg.seed;
    } else if (!grid.entries.count("seed")) {
        fail(ErrorKind::UsageError, "a seed is required, in the config file or via --seed");
    }
    if (!grid.entries.count("nominal_level")) grid.base.nominal_level = cfg.alpha_level;
    const auto specs = expand_grid(grid);
    for (const auto& s : specs) s.validate();

    ResultTable t = detail::start_table(cfg);
    for (const auto& [k, v] : grid.entries) t.header.push_back("config." + k + " = " + v);
    t.header.push_back("effective seed = " + std::to_string(grid.base.seed));

    std::vector<PowerReport> reports;
    for (const auto& s : specs) reports.push_back(run_study(s, cfg.threads));

    const std::size_t per_beta = grid.columns.empty() ? 1 : grid.columns.size();
    t.columns = {"beta", "measure"};
    for (std::size_t c = 0; c < per_beta; ++c) {
        const auto& s = reports[c].spec;
        t.columns.push_back(std::string(to_string(s.link)) + ":" + format_double(s.alpha.front()));
    }
    const bool corrected = grid.base.correction;
    std::size_t resamples = 0;
    for (std::size_t b = 0; b < grid.betas.size(); ++b) {
        std::vector<std::string> rate{format_double(grid.betas[b]), "rate"};
        std::vector<std::string> se{format_double(grid.betas[b]), "mc_stderr"};
        std::vector<std::string> adj{format_double(grid.betas[b]), "rate_adjusted"};
        for (std::size_t c = 0; c < per_beta; ++c) {
            const auto& r = reports[b * per_beta + c];
            rate.push_back(format_double(r.rejection_rate));
            se.push_back(format_double(r.mc_stderr));
            adj.push_back(format_optional(r.adjusted_rate));
            resamples += r.covariate_resamples;
        }
        t.rows.push_back(std::move(rate));
        t.rows.push_back(std::move(se));
        if (corrected) t.rows.push_back(std::move(adj));
    }
    t.header.push_back("covariate resamples = " + std::to_string(resamples));
    return t;
}

/// Appends a BH column to an existing tab-separated table. Comment lines of
/// the input are carried over.
inline ResultTable cmd_adjust(const RunConfig& cfg) {
    cfg.validate();
    const std::string content = detail::read_file(cfg.in_path);
    ResultTable t = detail::start_table(cfg);
    std::string_view rest = content;
    if (rest.starts_with("\xEF\xBB\xBF")) rest.remove_prefix(3);
    std::size_t number = 0;
    bool have_header = false;
    std::vector<std::size_t> line_numbers;
    while (!rest.empty()) {
        ++number;
        const auto nl = rest.find('\n');
        std::string_view line = rest.substr(0, nl);
        rest.remove_prefix(nl == std::string_view::npos ? rest.size() : nl + 1);
        if (line.ends_with('\r')) line.remove_suffix(1);
        if (line.empty()) continue;
        if (line.front() == '#') {
            line.remove_prefix(1);
            if (line.starts_with(' ')) line.remove_prefix(1);
            t.header.push_back("input: " + std::string(line));
            continue;
        }
        const auto cells = split_tabs(line);
        if (!have_header) {
            for (auto c : cells) t.columns.emplace_back(c);
            have_header = true;
            continue;
        }
        if (cells.size() != t.columns.size())
            throw MalformedInput(number, std::min(cells.size(), t.columns.size()) + 1, "row width differs from header");
        std::vector<std::string> row;
        for (auto c : cells) row.emplace_back(c);
        t.rows.push_back(std::move(row));
        line_numbers.push_back(number);
    }
    if (!have_header) fail(ErrorKind::EmptyFile, "input table is empty");
    const std::size_t pc = t.column(cfg.p_col);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& cell = t.rows[r][pc];
        if (cell == "NA" || cell == "nan" || cell.empty()) continue;
        detail::parse_cell(cell, line_numbers[r], pc + 1);
    }
    const std::string name = cfg.p_col + "_bh";
    for (const auto& c : t.columns)
        if (c == name) fail(ErrorKind::ValidationError, "input already has a column '" + name + "'");
    detail::append_bh_column(t, pc, name);
    return t;
}

}  // namespace dyncov
