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

// Tab-separated inputs.
//
//   expression:  header of sample ids (optionally preceded by a label cell),
//                then one row per gene: gene id, N values
//   covariates:  header of covariate names (optionally preceded by a label
//                cell), then one row per sample: sample id, values
//   TF targets:  tf id, target id, optional numeric score
//
// Blank lines and lines starting with '#' are skipped; LF and CRLF are both
// accepted. Numbers are parsed without regard to locale.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dyncov/errors.hpp"
#include "dyncov/format.hpp"
#include "dyncov/types.hpp"

namespace dyncov {

namespace detail {

struct Line {
    std::size_t number;  // 1-based
    std::string_view text;
};

/// Non-comment, non-blank lines of `content`, which must outlive the result.
inline std::vector<Line> content_lines(std::string_view content) {
    if (content.starts_with("\xEF\xBB\xBF")) content.remove_prefix(3);
    std::vector<Line> out;
    std::size_t number = 0;
    while (!content.empty()) {
        ++number;
        const auto nl = content.find('\n');
        std::string_view line = content.substr(0, nl);
        content.remove_prefix(nl == std::string_view::npos ? content.size() : nl + 1);
        if (line.ends_with('\r')) line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
        out.push_back({number, line});
    }
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoError, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline double parse_cell(std::string_view cell, std::size_t line, std::size_t column) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw MalformedInput(line, column, "'" + std::string(cell) + "' is not a finite number");
    return v;
}

/// A header may or may not carry a label cell above the id column.
inline std::vector<std::string> header_names(const Line& header, std::size_t body_width) {
    auto cells = split_tabs(header.text);
    if (cells.size() == body_width) cells.erase(cells.begin());
    if (cells.size() + 1 != body_width)
        throw MalformedInput(header.number, 1,
                             "header has " + std::to_string(cells.size()) + " names but rows have " +
                                 std::to_string(body_width - 1) + " values");
    std::vector<std::string> names;
    for (std::size_t j = 0; j < cells.size(); ++j) {
        if (cells[j].empty()) throw MalformedInput(header.number, j + 1, "empty header name");
        names.emplace_back(cells[j]);
    }
    return names;
}

struct Table {
    std::vector<std::string> column_names;
    std::vector<std::string> row_ids;
    Matrix values;  // rows x columns
};

inline Table parse_table(std::string_view content, const char* what) {
    const auto lines = content_lines(content);
    if (lines.empty()) fail(ErrorKind::EmptyFile, std::string(what) + " file has no content");
    if (lines.size() < 2) fail(ErrorKind::EmptyFile, std::string(what) + " file has a header but no rows");
    const std::size_t width = split_tabs(lines[1].text).size();
    if (width < 2) throw MalformedInput(lines[1].number, 1, "row has no values");

    Table t;
    t.column_names = header_names(lines[0], width);
    t.values.resize(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(width - 1));
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split_tabs(lines[r].text);
        if (cells.size() != width)
            throw MalformedInput(lines[r].number, std::min(cells.size(), width) + 1,
                                 "expected " + std::to_string(width) + " fields, found " + std::to_string(cells.size()));
        if (cells[0].empty()) throw MalformedInput(lines[r].number, 1, "empty row id");
        t.row_ids.emplace_back(cells[0]);
        for (std::size_t c = 1; c < width; ++c)
            t.values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c - 1)) =
                parse_cell(cells[c], lines[r].number, c + 1);
    }
    return t;
}

}  // namespace detail

inline DataMatrix parse_expression_text(std::string_view content) {
    auto t = detail::parse_table(content, "expression");
    detail::require_unique(t.row_ids, ErrorKind::DuplicateGene, "gene id");
    return DataMatrix(t.values.transpose(), std::move(t.row_ids), std::move(t.column_names));
}

inline DataMatrix parse_expression(const std::string& path) { return parse_expression_text(detail::read_file(path)); }

/// Genes as rows, samples as columns, values in shortest round-trip form.
inline void write_expression(std::ostream& out, const DataMatrix& y) {
    out << "gene";
    for (const auto& s : y.sample_ids()) out << '\t' << s;
    out << '\n';
    for (Eigen::Index g = 0; g < y.genes(); ++g) {
        out << y.gene_ids()[static_cast<std::size_t>(g)];
        for (Eigen::Index i = 0; i < y.samples(); ++i) out << '\t' << format_double(y.values()(i, g));
        out << '\n';
    }
}

struct CovariateTable {
    std::vector<std::string> names;
    std::vector<std::string> sample_ids;
    Matrix values;  // samples x covariates

    std::optional<Eigen::Index> column(const std::string& name) const {
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) return std::nullopt;
        return static_cast<Eigen::Index>(it - names.begin());
    }
};

inline CovariateTable parse_covariates_text(std::string_view content) {
    auto t = detail::parse_table(content, "covariate");
    detail::require_unique(t.row_ids, ErrorKind::ValidationError, "covariate sample id");
    detail::require_unique(t.column_names, ErrorKind::ValidationError, "covariate name");
    return CovariateTable{std::move(t.column_names), std::move(t.row_ids), std::move(t.values)};
}

inline CovariateTable parse_covariates(const std::string& path) { return parse_covariates_text(detail::read_file(path)); }

struct AlignedDataset {
    DataMatrix y;
    MeanCovariates z;
    VarianceCovariates x;
    std::vector<std::string> x_names;
    std::vector<std::string> z_names;  // excluding the intercept
    std::size_t dropped_expression_samples = 0;
    std::size_t dropped_covariate_samples = 0;
};

/// Restricts both inputs to the sorted intersection of sample ids. X takes
/// the `x_cols` covariates; Z is an intercept followed by the `z_cols`.
inline AlignedDataset align(const DataMatrix& expr, const CovariateTable& covar, const std::vector<std::string>& x_cols,
                            const std::vector<std::string>& z_cols) {
    if (x_cols.empty()) fail(ErrorKind::UsageError, "at least one variance covariate is required");
    auto lookup = [&](const std::vector<std::string>& cols) {
        std::vector<Eigen::Index> idx;
        for (const auto& c : cols) {
            const auto j = covar.column(c);
            if (!j) fail(ErrorKind::ValidationError, "covariate column '" + c + "' not found");
            idx.push_back(*j);
        }
        return idx;
    };
    const auto xi = lookup(x_cols);
    const auto zi = lookup(z_cols);

    std::unordered_map<std::string, Eigen::Index> covar_row;
    for (std::size_t i = 0; i < covar.sample_ids.size(); ++i)
        covar_row.emplace(covar.sample_ids[i], static_cast<Eigen::Index>(i));
    std::map<std::string, std::pair<Eigen::Index, Eigen::Index>> shared;  // sorted by id
    for (std::size_t i = 0; i < expr.sample_ids().size(); ++i) {
        const auto it = covar_row.find(expr.sample_ids()[i]);
        if (it != covar_row.end()) shared.emplace(it->first, std::pair{static_cast<Eigen::Index>(i), it->second});
    }
    if (shared.empty()) fail(ErrorKind::AlignmentError, "expression and covariate files share no sample ids");
    if (shared.size() < 3) fail(ErrorKind::AlignmentError, "fewer than 3 shared samples");

    const auto n = static_cast<Eigen::Index>(shared.size());
    Matrix y(n, expr.genes());
    Matrix x(n, static_cast<Eigen::Index>(xi.size()));
    Matrix zc(n, static_cast<Eigen::Index>(zi.size()));
    std::vector<std::string> samples;
    Eigen::Index r = 0;
    for (const auto& [id, rows] : shared) {
        y.row(r) = expr.values().row(rows.first);
        for (std::size_t j = 0; j < xi.size(); ++j) x(r, static_cast<Eigen::Index>(j)) = covar.values(rows.second, xi[j]);
        for (std::size_t j = 0; j < zi.size(); ++j) zc(r, static_cast<Eigen::Index>(j)) = covar.values(rows.second, zi[j]);
        samples.push_back(id);
        ++r;
    }
    return AlignedDataset{DataMatrix(std::move(y), expr.gene_ids(), std::move(samples)),
                          MeanCovariates::with_intercept(zc),
                          VarianceCovariates(std::move(x)),
                          x_cols,
                          z_cols,
                          expr.sample_ids().size() - shared.size(),
                          covar.sample_ids.size() - shared.size()};
}

struct TfEdge {
    std::string target;
    std::optional<double> score;
};

struct TfTargetMap {
    std::vector<std::string> tfs;  // first-appearance order
    std::unordered_map<std::string, std::vector<TfEdge>> edges;
    std::size_t self_edges_dropped = 0;
    std::size_t duplicate_edges_dropped = 0;

    std::size_t edge_count() const {
        std::size_t total = 0;
        for (const auto& [tf, list] : edges) total += list.size();
        return total;
    }

    std::vector<std::string> targets(const std::string& tf) const {
        std::vector<std::string> out;
        const auto it = edges.find(tf);
        if (it != edges.end())
            for (const auto& e : it->second) out.push_back(e.target);
        return out;
    }

    std::size_t warnings() const noexcept { return self_edges_dropped + duplicate_edges_dropped; }
};

/// Duplicate (tf, target) edges keep the first listing, upgraded to the
/// largest score seen.
inline TfTargetMap parse_tf_targets_text(std::string_view content) {
    const auto lines = detail::content_lines(content);
    if (lines.empty()) fail(ErrorKind::EmptyFile, "TF-target file has no content");
    TfTargetMap m;
    std::unordered_map<std::string, std::unordered_map<std::string, std::size_t>> seen;
    for (const auto& line : lines) {
        const auto cells = split_tabs(line.text);
        if (cells.size() < 2 || cells.size() > 3)
            throw MalformedInput(line.number, 1, "expected 2 or 3 fields, found " + std::to_string(cells.size()));
        if (cells[0].empty()) throw MalformedInput(line.number, 1, "empty TF id");
        if (cells[1].empty()) throw MalformedInput(line.number, 2, "empty target id");
        std::optional<double> score;
        if (cells.size() == 3) score = detail::parse_cell(cells[2], line.number, 3);

        const std::string tf(cells[0]);
        const std::string target(cells[1]);
        if (tf == target) {
            ++m.self_edges_dropped;
            continue;
        }
        auto& list = m.edges[tf];
        if (list.empty() && !seen.count(tf)) m.tfs.push_back(tf);
        auto& index = seen[tf];
        const auto found = index.find(target);
        if (found != index.end()) {
            ++m.duplicate_edges_dropped;
            auto& prior = list[found->second].score;
            if (score && (!prior || *score > *prior)) prior = score;
            continue;
        }
        index.emplace(target, list.size());
        list.push_back({target, score});
    }
    return m;
}

inline TfTargetMap parse_tf_targets(const std::string& path) { return parse_tf_targets_text(detail::read_file(path)); }

struct TfFilter {
    bool max_tier = false;
    std::optional<double> min_score;
};

/// Keeps edges at each TF's highest score and/or above a threshold. Both
/// filters need a score on every edge of the TF.
inline TfTargetMap filter_tf_targets(const TfTargetMap& in, const TfFilter& filter) {
    if (!filter.max_tier && !filter.min_score) return in;
    TfTargetMap out;
    out.self_edges_dropped = in.self_edges_dropped;
    out.duplicate_edges_dropped = in.duplicate_edges_dropped;
    for (const auto& tf : in.tfs) {
        const auto& list = in.edges.at(tf);
        double top = -std::numeric_limits<double>::infinity();
        for (const auto& e : list) {
            if (!e.score) fail(ErrorKind::ValidationError, "TF '" + tf + "' has edges without scores");
            top = std::max(top, *e.score);
        }
        std::vector<TfEdge> kept;
        for (const auto& e : list) {
            if (filter.max_tier && *e.score != top) continue;
            if (filter.min_score && *e.score < *filter.min_score) continue;
            kept.push_back(e);
        }
        if (kept.empty()) continue;
        out.tfs.push_back(tf);
        out.edges.emplace(tf, std::move(kept));
    }
    return out;
}

}  // namespace dyncov
