// atl_lab: command-line front end for the experiment harness.
//
//   atl_lab train-source --config cfg.ini --seeds 1,2,3 --out runs/src
//   atl_lab transfer-atl --config cfg.ini --set atl.beta_lr=0.05
//   atl_lab aggregate runs/a/transfer-atl_seed*.csv --out agg.csv
//   atl_lab plot-data agg.csv --quantity beta --out beta.dat

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "atl/harness/config.hpp"
#include "atl/harness/csv.hpp"
#include "atl/harness/experiment.hpp"

namespace {

struct RunOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string seeds;
    std::string out;
    std::vector<std::string> sets;
    int workers = 1;
};

int run_kind(const std::string& kind, const RunOptions& o) {
    using namespace atl::harness;
    ConfigTree tree;
    if (!o.config.empty()) tree = read_config_file(o.config);
    tree.put("experiment.kind", kind);
    for (const auto& s : o.sets) apply_override(tree, s);
    ExperimentConfig cfg = config_from_tree(tree);
    if (o.seed) cfg.seeds = {*o.seed};
    if (!o.seeds.empty()) cfg.seeds = parse_list<std::uint64_t>(o.seeds);
    if (!o.out.empty()) cfg.out_dir = o.out;

    const ExperimentSummary summary = run_experiment(cfg, std::cout, o.workers);
    if (!summary.aggregate_file.empty()) std::cout << "aggregate -> " << summary.aggregate_file << '\n';
    for (const auto& f : summary.snapshot_files) std::cout << "snapshot -> " << f << '\n';
    if (!summary.failures.empty()) {
        std::cerr << "error: " << summary.failures.size() << " seed(s) failed; first: " << summary.failures.front()
                  << '\n';
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive transfer learning experiments"};
    app.require_subcommand(1);

    RunOptions run;
    const char* kinds[] = {"train-source",     "transfer-atl", "baseline-warmstart",
                           "baseline-scratch", "eval-source",  "verify-theory"};
    std::string chosen_kind;
    for (const char* k : kinds) {
        auto* sub = app.add_subcommand(k, std::string("run the ") + k + " experiment");
        sub->add_option("--config", run.config, "INI config file")->check(CLI::ExistingFile);
        auto* seed = sub->add_option("--seed", run.seed, "single seed");
        sub->add_option("--seeds", run.seeds, "comma-separated seeds")->excludes(seed);
        sub->add_option("--out", run.out, "output directory");
        sub->add_option("--set", run.sets, "override, section.key=value (repeatable)");
        sub->add_option("--workers", run.workers, "seeds run concurrently")->check(CLI::PositiveNumber);
        sub->callback([&chosen_kind, k] { chosen_kind = k; });
    }

    std::vector<std::string> agg_inputs;
    std::string agg_out;
    auto* agg = app.add_subcommand("aggregate", "mean/std/min/max across per-seed CSV files");
    agg->add_option("files", agg_inputs, "per-seed CSV files")->required()->check(CLI::ExistingFile);
    agg->add_option("--out", agg_out, "aggregate CSV path")->required();

    std::string plot_input;
    std::string plot_quantity = "mean_env_return";
    std::string plot_out;
    auto* plot = app.add_subcommand("plot-data", "x/y/band table from an aggregate CSV");
    plot->add_option("file", plot_input, "aggregate CSV")->required()->check(CLI::ExistingFile);
    plot->add_option("--quantity", plot_quantity, "record column, e.g. beta");
    plot->add_option("--out", plot_out, "output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (!chosen_kind.empty()) return run_kind(chosen_kind, run);
        if (agg->parsed()) {
            atl::harness::write_table(agg_out, atl::harness::aggregate_files(agg_inputs));
            return 0;
        }
        if (plot->parsed()) {
            atl::harness::write_table(plot_out,
                                      atl::harness::plot_data(atl::harness::read_table(plot_input), plot_quantity));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
