#include <cstdio>
#include <fstream>

#include "amss/harness.hpp"

namespace amss {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

GridResult grid_sweep(const RunConfig& cfg, const std::vector<double>& axis1,
                      const std::vector<double>& axis2) {
    if (cfg.strategy != Strategy::UniformMask && cfg.strategy != Strategy::GlobalWise)
        throw Error("grid sweeps cover uniform_mask or global_wise, got " +
                    strategy_name(cfg.strategy));
    if (axis1.empty() || axis2.empty()) throw Error("grid sweep needs non-empty axes");

    RunConfig base = cfg;
    if (cfg.strategy == Strategy::UniformMask)
        base.uniform_rho = {axis1.front(), axis2.front()};
    else
        base.global_v = {axis1.front(), axis2.front()};
    base.validate();

    const Dataset ds = cfg.data_path.empty() ? generate(cfg.data) : load_dataset(cfg.data_path);
    if (ds.spec.modalities != 2)
        throw Error("grid sweeps bind the two axes to two modalities, dataset has " +
                    std::to_string(ds.spec.modalities));

    GridResult g;
    g.axis1 = axis1;
    g.axis2 = axis2;
    g.accuracy.assign(axis1.size(), std::vector<double>(axis2.size(), 0.0));
    for (std::size_t i = 0; i < axis1.size(); ++i)
        for (std::size_t j = 0; j < axis2.size(); ++j) {
            RunConfig c = base;
            if (cfg.strategy == Strategy::UniformMask)
                c.uniform_rho = {axis1[i], axis2[j]};
            else
                c.global_v = {axis1[i], axis2[j]};
            g.accuracy[i][j] = train(c, ds).final_eval.accuracy;
        }
    return g;
}

void write_grid_csv(const std::string& path, const GridResult& g) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << "axis1,axis2,accuracy\n";
    for (std::size_t i = 0; i < g.axis1.size(); ++i)
        for (std::size_t j = 0; j < g.axis2.size(); ++j)
            out << fmt(g.axis1[i]) << "," << fmt(g.axis2[j]) << "," << fmt(g.accuracy[i][j])
                << "\n";
    if (!out) throw Error("short write to " + path);
}

std::vector<TauRow> tau_sweep(const RunConfig& cfg, const std::vector<double>& taus) {
    if (taus.empty()) throw Error("tau sweep needs at least one value");
    const Dataset ds = cfg.data_path.empty() ? generate(cfg.data) : load_dataset(cfg.data_path);
    std::vector<TauRow> rows;
    for (const double tau : taus) {
        if (!(tau > 0.0)) throw Error("tau values must be positive, got " + fmt(tau));
        RunConfig c = cfg;
        c.tau = tau;
        const RunResult rr = train(c, ds);
        TauRow row;
        row.tau = tau;
        row.accuracy = rr.final_eval.accuracy;
        row.rho_bar = rr.rho_bar10;
        rows.push_back(row);
    }
    return rows;
}

void write_tau_csv(const std::string& path, const std::vector<TauRow>& rows) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << "tau,accuracy";
    const std::size_t K = rows.empty() ? 0 : rows.front().rho_bar.size();
    for (std::size_t k = 0; k < K; ++k) out << ",rho_bar_" << k;
    out << "\n";
    for (const auto& r : rows) {
        out << fmt(r.tau) << "," << fmt(r.accuracy);
        for (const double v : r.rho_bar) out << "," << fmt(v);
        out << "\n";
    }
    if (!out) throw Error("short write to " + path);
}

}  // namespace amss
