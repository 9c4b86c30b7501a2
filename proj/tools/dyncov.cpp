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

// dyncov: tests for covariance that changes with continuous covariates.
//
// Exit codes: 0 success, 2 usage or config error, 3 data validation error,
// 4 numerical degeneracy.

#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "dyncov/dyncov.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

int exit_code(dyncov::ErrorKind kind) {
    if (kind == dyncov::ErrorKind::UsageError) return kExitUsage;
    if (dyncov::is_numerical(kind)) return kExitNumerical;
    return kExitData;
}

void add_data_options(CLI::App* cmd, dyncov::RunConfig& cfg) {
    cmd->add_option("--expr", cfg.expr_path, "Expression TSV: genes as rows, samples as columns")->required();
    cmd->add_option("--covar", cfg.covar_path, "Covariate TSV: samples as rows")->required();
    cmd->add_option("--x-cols", cfg.x_cols, "Covariates of the variance model")->delimiter(',')->required();
    cmd->add_option("--z-cols", cfg.z_cols, "Covariates of the mean model (an intercept is always added)")
        ->delimiter(',');
}

void add_common_options(CLI::App* cmd, dyncov::RunConfig& cfg) {
    cmd->add_option("--seed", cfg.seed, "Master seed for stochastic steps");
    cmd->add_option("--alpha-level", cfg.alpha_level, "Significance level")->capture_default_str();
    cmd->add_option("--threads", cfg.threads, "Worker threads; results do not depend on this")
        ->capture_default_str();
    cmd->add_option("--out", cfg.out_path, "Output path (default: standard output)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dyncov: score tests for covariate-dependent covariance"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "dyncov 0.1.0");

    dyncov::RunConfig cfg;
    std::map<std::string, dyncov::Correction> corrections{{"none", dyncov::Correction::None},
                                                          {"honda", dyncov::Correction::Honda}};
    std::map<std::string, bool> on_off{{"on", true}, {"off", false}};

    auto* pairwise = app.add_subcommand("pairwise", "Score test for each gene pair");
    add_data_options(pairwise, cfg);
    pairwise->add_option("--pairs", cfg.pairs_path, "TSV of gene pairs to test");
    pairwise->add_option("--genes", cfg.genes, "Test all pairs among these genes")->delimiter(',');
    pairwise->add_option("--correction", cfg.correction, "Small-sample correction")
        ->transform(CLI::CheckedTransformer(corrections, CLI::ignore_case))
        ->default_str("none");
    add_common_options(pairwise, cfg);

    auto* hub = app.add_subcommand("hub", "Local-connectivity test for each TF against its targets");
    add_data_options(hub, cfg);
    hub->add_option("--tf-map", cfg.tf_map_path, "TSV of tf, target, optional score")->required();
    hub->add_flag("--max-tier", cfg.tf_max_tier, "Keep only the highest-scoring targets of each TF");
    hub->add_option("--min-score", cfg.tf_min_score, "Keep only targets with at least this score");
    hub->add_option("--min-perm", cfg.min_perm, "Permutations before the first stopping check")
        ->capture_default_str();
    hub->add_option("--max-perm", cfg.max_perm, "Permutation cap")->capture_default_str();
    hub->add_option("--batch", cfg.batch, "Permutations added per round")->capture_default_str();
    hub->add_option("--exceed", cfg.exceed, "Exceedances that stop the permutation test")->capture_default_str();
    hub->add_option("--mc-draws", cfg.mc_draws, "Monte-Carlo draws for the gamma-sum null")->capture_default_str();
    hub->add_option("--analytic", cfg.analytic, "Gamma-sum p-values (on/off)")
        ->transform(CLI::CheckedTransformer(on_off, CLI::ignore_case))
        ->default_str("on");
    hub->add_option("--top", cfg.top, "Hubs with the largest d/J to permute (0 = all)")->capture_default_str();
    add_common_options(hub, cfg);

    auto* simulate = app.add_subcommand("simulate", "Calibration and power study from a config file");
    simulate->add_option("--config", cfg.config_path, "Study config (key = value lines)")->required();
    add_common_options(simulate, cfg);

    auto* adjust = app.add_subcommand("adjust", "Append Benjamini-Hochberg adjusted p-values to a table");
    adjust->add_option("--in", cfg.in_path, "Input TSV")->required();
    adjust->add_option("--p-col", cfg.p_col, "Column holding p-values")->capture_default_str();
    add_common_options(adjust, cfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        dyncov::ResultTable table;
        if (*pairwise) {
            cfg.subcommand = "pairwise";
            table = dyncov::cmd_pairwise(cfg);
        } else if (*hub) {
            cfg.subcommand = "hub";
            table = dyncov::cmd_hub(cfg);
        } else if (*simulate) {
            cfg.subcommand = "simulate";
            table = dyncov::cmd_simulate(cfg);
        } else {
            cfg.subcommand = "adjust";
            table = dyncov::cmd_adjust(cfg);
        }
        if (cfg.out_path.empty()) {
            table.write(std::cout);
        } else {
            std::ofstream out(cfg.out_path, std::ios::binary);
            if (!out) throw dyncov::Error(dyncov::ErrorKind::IoError, "cannot write '" + cfg.out_path + "'");
            table.write(out);
            if (!out) throw dyncov::Error(dyncov::ErrorKind::IoError, "write to '" + cfg.out_path + "' failed");
        }
        for (const auto& h : table.header)
            if (h.starts_with("warning: ")) std::cerr << "dyncov: " << h << '\n';
    } catch (const dyncov::Error& e) {
        std::cerr << "dyncov: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "dyncov: " << e.what() << '\n';
        return kExitData;
    }
    return 0;
}
