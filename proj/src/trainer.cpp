#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "amss/harness.hpp"
#include "amss/optimizer.hpp"
#include "amss/significance.hpp"

namespace amss {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// Per-batch significance estimates, one per modality.
std::vector<double> batch_estimates(const Model& m, const LabeledBatch& b,
                                    const ForwardCache& cache) {
    const std::size_t K = m.spec.modalities;
    const double h_y = label_entropy(b.y);
    std::vector<double> u_hat(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        const Tensor q = m.spec.late_fusion() ? cache.q[k] : predict_unimodal(m, b, k);
        std::vector<double> tcp(b.size());
        for (std::size_t i = 0; i < b.size(); ++i) {
            std::size_t y = 0;
            for (std::size_t c = 0; c < q.cols(); ++c)
                if (b.y.at(i, c) == 1.0) y = c;
            tcp[i] = std::clamp(q.at(i, y), 1e-12, 1.0);
        }
        const double lb = mi_lower_bound(tcp, h_y);
        u_hat[k] = mi_rate(lb, mean_prediction_entropy(q));
    }
    return u_hat;
}

MaskMode mode_of(Strategy s) {
    switch (s) {
        case Strategy::Amss: return MaskMode::Amss;
        case Strategy::AmssPlus: return MaskMode::AmssPlus;
        case Strategy::TheoreticalUnbiased: return MaskMode::TheoreticalUnbiased;
        default: return MaskMode::None;
    }
}

}  // namespace

RunResult train(const RunConfig& cfg, const Dataset& ds) {
    cfg.validate();
    const std::size_t K = ds.spec.modalities;
    if (cfg.strategy == Strategy::GlobalWise && cfg.global_v.size() != K)
        throw Error("strategy.v needs " + std::to_string(K) + " entries, got " +
                    std::to_string(cfg.global_v.size()));
    if (cfg.strategy == Strategy::UniformMask && cfg.uniform_rho.size() != K)
        throw Error("strategy.rho needs " + std::to_string(K) + " entries, got " +
                    std::to_string(cfg.uniform_rho.size()));

    const ModelSpec ms = cfg.model_spec(ds.spec);
    Rng rng_init(cfg.seed, kStreamInit);
    Rng rng_sample(cfg.seed, kStreamSample);
    Rng rng_shuffle(cfg.seed, kStreamShuffle);
    Model model = build_model(ms, rng_init);

    if (cfg.strategy == Strategy::TheoreticalUnbiased) {
        for (std::size_t k = 0; k < K; ++k)
            for (const auto& id : scoped_layer_ids(model, k, cfg.scope)) {
                const std::size_t L = layer_by_id(model, id).w.rows();
                if (L > 12)
                    throw Error("theoretical_unbiased needs layers of at most 12 units; " + id +
                                " has " + std::to_string(L));
            }
    }

    OptimizerState opt(cfg.lr, cfg.momentum, cfg.decay);
    SignificanceState sig(K, cfg.lambda, cfg.tau);
    const bool masking = cfg.strategy == Strategy::UniformMask ||
                         mode_of(cfg.strategy) != MaskMode::None;

    const std::size_t N = ds.train.size();
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<UnitImportance> fisher(K);
    bool fisher_valid = false;
    std::size_t iter = 0;

    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t stall = 0;

    RunResult res;
    std::vector<double> rho10(K, 0.0);
    std::size_t rho10_n = 0;
    EvalResult ev;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng_shuffle.shuffle(order);
        double loss_sum = 0.0;
        std::vector<double> uhat_sum(K, 0.0), rho_sum(K, 0.0);
        std::size_t batches = 0;

        for (std::size_t start = 0; start < N; start += cfg.batch) {
            const std::size_t stop = std::min(start + cfg.batch, N);
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(stop));
            const LabeledBatch b = gather(ds.train, idx);

            auto [loss, cache] = forward(model, b);
            loss_sum += loss * static_cast<double>(b.size());

            const std::vector<double> u_hat = batch_estimates(model, b, cache);
            update_significance(sig, u_hat);
            const std::vector<double> rho = update_ratios(sig);
            for (std::size_t k = 0; k < K; ++k) {
                uhat_sum[k] += u_hat[k];
                rho_sum[k] += rho[k];
            }
            if (epoch < 10) {
                for (std::size_t k = 0; k < K; ++k) rho10[k] += rho[k];
                ++rho10_n;
            }
            ++batches;

            GradientSet grads = backward(cache);
            auto params = param_store(model);

            if (!masking) {
                if (cfg.strategy == Strategy::GlobalWise)
                    global_scaled_step(params, grads, cfg.global_v, opt);
                else
                    sgd_step(params, grads, opt);
                ++iter;
                continue;
            }

            std::vector<MaskPlan> plans;
            for (std::size_t k = 0; k < K; ++k) {
                if (cfg.strategy == Strategy::UniformMask) {
                    plans.push_back(
                        uniform_mask_plan(model, k, cfg.uniform_rho[k], cfg.scope, rng_sample));
                    continue;
                }
                if (!fisher_valid || iter % cfg.fisher_stride == 0)
                    fisher[k] = accumulate_fisher(model, b, k);
                const auto scoped = scoped_layer_ids(model, k, cfg.scope);
                UnitImportance imp;
                imp.modality = k;
                for (const auto& li : fisher[k].layers)
                    if (std::find(scoped.begin(), scoped.end(), li.layer_id) != scoped.end())
                        imp.layers.push_back(li);
                std::vector<std::vector<std::size_t>> selected;
                for (auto& li : imp.layers) {
                    const std::size_t L = li.p.size();
                    const std::size_t n = selection_count(rho[k], L);
                    if (n == 0) {
                        selected.emplace_back();
                        continue;
                    }
                    std::size_t positives = 0;
                    for (double pj : li.p)
                        if (pj > 0.0) ++positives;
                    if (positives < n) {
                        // too few live units to honor the Fisher law for this
                        // draw; treat the layer as uniform so the mask values
                        // stay consistent with the realized sampling
                        li.p.assign(L, 1.0 / static_cast<double>(L));
                        li.uniform_fallback = true;
                    }
                    selected.push_back(sample_without_replacement(li.p, n, rng_sample));
                }
                plans.push_back(build_mask(selected, imp, rho[k], mode_of(cfg.strategy)));
            }
            if (cfg.strategy != Strategy::UniformMask) fisher_valid = true;

            std::set<std::string> covered;
            for (const auto& plan : plans)
                for (const auto& lm : plan.layers) covered.insert(lm.layer_id);
            for (const auto& plan : plans) masked_step(model, grads, plan, opt);
            std::vector<ParamRef> rest;
            for (const auto& pr : params)
                if (covered.count(pr.layer_id) == 0) rest.push_back(pr);
            sgd_step(rest, grads, opt);
            ++iter;
        }

        ev = evaluate(model, ds.test);
        MetricsRow row;
        row.epoch = epoch;
        row.train_loss = loss_sum / static_cast<double>(N);
        row.accuracy = ev.accuracy;
        row.macro_f1 = ev.macro_f1;
        row.branch_acc = ev.branch_acc;
        row.u_hat.resize(K);
        row.rho.resize(K);
        for (std::size_t k = 0; k < K; ++k) {
            row.u_hat[k] = uhat_sum[k] / static_cast<double>(batches);
            row.rho[k] = rho_sum[k] / static_cast<double>(batches);
        }
        row.u = sig.u;
        row.imbalance = imbalance_degree(sig.u);
        res.rows.push_back(row);

        if (row.train_loss < best_loss - 1e-4) {
            best_loss = row.train_loss;
            stall = 0;
        } else if (++stall >= cfg.lr_patience) {
            opt.lr *= 0.1;
            stall = 0;
        }
    }

    res.final_eval = ev;
    res.rho_bar10.assign(K, 0.0);
    if (rho10_n > 0)
        for (std::size_t k = 0; k < K; ++k)
            res.rho_bar10[k] = rho10[k] / static_cast<double>(rho10_n);
    res.model = std::move(model);
    return res;
}

std::string resolve_output_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    fs::path p(dir);
    if (p.is_absolute()) return p.lexically_normal().string();
    const char* root = std::getenv("AMSS_OUTPUT_ROOT");
    fs::path base = (root != nullptr && *root != '\0') ? fs::path(root) : fs::current_path();
    return (base / p).lexically_normal().string();
}

std::string run_experiment(const RunConfig& cfg) {
    cfg.validate();
    const Dataset ds = cfg.data_path.empty() ? generate(cfg.data) : load_dataset(cfg.data_path);
    RunResult rr = train(cfg, ds);

    std::string name = cfg.out_dir;
    if (name.empty())
        name = "runs/" + strategy_name(cfg.strategy) + "-seed" + std::to_string(cfg.seed);
    const std::string dir = resolve_output_dir(name);
    std::filesystem::create_directories(dir);

    write_metrics_csv(dir + "/metrics.csv", rr.rows);
    save_checkpoint(rr.model, dir + "/model.ckpt");

    std::ofstream out(dir + "/summary.txt");
    if (!out) throw Error("cannot write " + dir + "/summary.txt");
    out << "strategy=" << strategy_name(cfg.strategy) << "\n";
    out << "fusion=" << fusion_name(cfg.fusion) << "\n";
    out << "scope=" << scope_name(cfg.scope) << "\n";
    out << "seed=" << cfg.seed << "\n";
    out << "epochs=" << cfg.epochs << "\n";
    out << "final_accuracy=" << fmt(rr.final_eval.accuracy) << "\n";
    out << "final_macro_f1=" << fmt(rr.final_eval.macro_f1) << "\n";
    for (std::size_t k = 0; k < rr.final_eval.branch_acc.size(); ++k)
        out << "branch_acc_" << k << "=" << fmt(rr.final_eval.branch_acc[k]) << "\n";
    for (std::size_t k = 0; k < rr.rho_bar10.size(); ++k)
        out << "rho_bar_" << k << "=" << fmt(rr.rho_bar10[k]) << "\n";
    out << "final_imbalance=" << fmt(rr.rows.back().imbalance) << "\n";
    out.close();

    emit_plots(dir);
    return dir;
}

}  // namespace amss
