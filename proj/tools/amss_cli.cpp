#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "amss/harness.hpp"
#include "amss/verify.hpp"

namespace {

amss::RunConfig load_config(const std::string& path) { return amss::parse_config_file(path); }

int cmd_run(const std::string& config_path) {
    const std::string dir = amss::run_experiment(load_config(config_path));
    std::cout << dir << "\n";
    return 0;
}

int cmd_grid(const std::string& config_path, const std::vector<double>& axis1,
             const std::vector<double>& axis2) {
    amss::RunConfig cfg = load_config(config_path);
    const amss::GridResult g = amss::grid_sweep(cfg, axis1, axis2);
    const std::string dir =
        amss::resolve_output_dir(cfg.out_dir.empty() ? std::string("sweeps") : cfg.out_dir);
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/grid.csv";
    amss::write_grid_csv(path, g);
    std::cout << path << "\n";
    return 0;
}

int cmd_tau(const std::string& config_path, const std::vector<double>& taus) {
    amss::RunConfig cfg = load_config(config_path);
    if (cfg.strategy != amss::Strategy::Amss && cfg.strategy != amss::Strategy::AmssPlus)
        throw amss::Error("tau sweeps need strategy amss or amss_plus, got " +
                          amss::strategy_name(cfg.strategy));
    const auto rows = amss::tau_sweep(cfg, taus);
    const std::string dir =
        amss::resolve_output_dir(cfg.out_dir.empty() ? std::string("sweeps") : cfg.out_dir);
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/tau.csv";
    amss::write_tau_csv(path, rows);
    std::cout << path << "\n";
    return 0;
}

int cmd_gen_data(const std::string& spec_path, const std::string& out) {
    const amss::RunConfig cfg = load_config(spec_path);
    if (!cfg.data_path.empty())
        throw amss::Error("gen-data needs an inline data spec, not data.path");
    const amss::Dataset ds = amss::generate(cfg.data);
    const std::string path = amss::resolve_output_dir(out);
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    amss::save_dataset(ds, path);
    std::cout << path << "\n";
    return 0;
}

int cmd_plot(const std::string& run_dir) {
    amss::emit_plots(run_dir);
    std::cout << run_dir << "\n";
    return 0;
}

int cmd_verify() {
    int failures = 0;
    for (const auto& r : amss::run_verify_suites()) {
        std::printf("%s %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        if (!r.passed) ++failures;
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive subnetwork-masking trainer for multi-modal models"};
    app.require_subcommand(1);

    std::string config_path, spec_path, run_dir, out_path = "dataset.csv";
    std::vector<double> axis1, axis2, taus;

    auto* run = app.add_subcommand("run", "train one configuration and emit artifacts");
    run->add_option("--config", config_path, "config file")->required();

    auto* grid = app.add_subcommand("grid", "accuracy matrix over two strategy axes");
    grid->add_option("--config", config_path, "config file")->required();
    grid->add_option("--axis1", axis1, "modality-1 axis values")->required()->delimiter(',');
    grid->add_option("--axis2", axis2, "modality-2 axis values")->required()->delimiter(',');

    auto* tau = app.add_subcommand("tau-sweep", "accuracy and mean update ratios per tau");
    tau->add_option("--config", config_path, "config file")->required();
    tau->add_option("--taus", taus, "temperatures")->required()->delimiter(',');

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset file");
    gen->add_option("--spec", spec_path, "config file with data.* keys")->required();
    gen->add_option("--out", out_path, "dataset file path (default dataset.csv)");

    auto* plot = app.add_subcommand("plot", "render SVG charts from a run directory");
    plot->add_option("--run", run_dir, "run directory with metrics csv")->required();

    app.add_subcommand("verify", "run the oracle suites");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path);
        if (grid->parsed()) return cmd_grid(config_path, axis1, axis2);
        if (tau->parsed()) return cmd_tau(config_path, taus);
        if (gen->parsed()) return cmd_gen_data(spec_path, out_path);
        if (plot->parsed()) return cmd_plot(run_dir);
        return cmd_verify();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
