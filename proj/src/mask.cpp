#include "amss/mask.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace amss {

std::string scope_name(MaskScope s) {
    switch (s) {
        case MaskScope::Backbone: return "backbone";
        case MaskScope::Classifier: return "classifier";
        case MaskScope::Both: return "both";
    }
    return "?";
}

MaskScope scope_from_name(const std::string& s) {
    if (s == "backbone") return MaskScope::Backbone;
    if (s == "classifier") return MaskScope::Classifier;
    if (s == "both") return MaskScope::Both;
    throw Error("unknown mask scope '" + s + "' (expected backbone|classifier|both)");
}

std::vector<std::string> scoped_layer_ids(const Model& m, std::size_t k, MaskScope scope) {
    if (k >= m.spec.modalities)
        throw Error("mask scope: modality " + std::to_string(k) + " out of range");
    const auto& layers = m.branch[k];
    // Late fusion: the branch's last layer is its classifier. Concat has no
    // per-modality classifier; every branch layer is backbone.
    const bool has_clf = m.spec.late_fusion() && !layers.empty();
    std::vector<std::string> ids;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const bool is_clf = has_clf && l + 1 == layers.size();
        if (scope == MaskScope::Both || (is_clf && scope == MaskScope::Classifier) ||
            (!is_clf && scope == MaskScope::Backbone))
            ids.push_back(layers[l].id);
    }
    return ids;
}

std::vector<MaskUnit> enumerate_mask_units(const Model& m, std::size_t k, MaskScope scope) {
    std::vector<MaskUnit> units;
    for (const auto& id : scoped_layer_ids(m, k, scope)) {
        const LinearLayer& L = layer_by_id(m, id);
        for (std::size_t j = 0; j < L.w.rows(); ++j) units.push_back({id, j});
    }
    if (units.empty())
        std::fprintf(stderr,
                     "warning: scope %s selects no mask units for modality %zu\n",
                     scope_name(scope).c_str(), k);
    return units;
}

UnitImportance accumulate_fisher(const Model& m, const LabeledBatch& batch, std::size_t k) {
    if (k >= m.spec.modalities)
        throw Error("accumulate_fisher: modality " + std::to_string(k) + " out of range");
    auto [loss, cache] = forward(m, batch);
    (void)loss;
    const std::size_t B = batch.size(), C = m.spec.classes;
    const auto& layers = m.branch[k];

    UnitImportance imp;
    imp.modality = k;
    imp.layers.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        imp.layers[l].layer_id = layers[l].id;
        imp.layers[l].fisher.assign(layers[l].w.rows(), 0.0);
    }

    const bool late = m.spec.late_fusion();
    std::size_t block_off = 0;
    if (!late)
        for (std::size_t j = 0; j < k; ++j)
            block_off += m.branch[j].empty() ? m.spec.input_dims[j] : m.branch[j].back().w.rows();

    for (std::size_t i = 0; i < B; ++i) {
        std::size_t y = 0;
        for (std::size_t c = 0; c < C; ++c)
            if (batch.y.at(i, c) == 1.0) y = c;

        // Per-sample gradient of log p(y_i | x_i) at the top of branch k.
        std::vector<double> d;
        if (late) {
            const double qy = cache.q[k].at(i, y);
            const double scale = cache.alpha[k] * qy / cache.p_true[i];
            d.resize(C);
            for (std::size_t c = 0; c < C; ++c)
                d[c] = scale * (cache.q[k].at(i, c) - (c == y ? 1.0 : 0.0));
        } else {
            const std::size_t W = m.joint.w.cols();
            const std::size_t w = cache.enc_out[k].cols();
            d.assign(w, 0.0);
            for (std::size_t c = 0; c < C; ++c) {
                const double dc = cache.p.at(i, c) - (c == y ? 1.0 : 0.0);
                if (dc == 0.0) continue;
                const double* row = &m.joint.w.data[c * W + block_off];
                for (std::size_t j = 0; j < w; ++j) d[j] += dc * row[j];
            }
            for (std::size_t j = 0; j < w; ++j)
                if (cache.enc_out[k].at(i, j) <= 0.0) d[j] = 0.0;
        }

        for (std::size_t l = layers.size(); l-- > 0;) {
            const Tensor& a = cache.acts[k][l];
            double norm2 = 1.0;  // the bias coordinate
            for (std::size_t c = 0; c < a.cols(); ++c) {
                const double v = a.at(i, c);
                norm2 += v * v;
            }
            auto& F = imp.layers[l].fisher;
            for (std::size_t j = 0; j < d.size(); ++j) F[j] += d[j] * d[j] * norm2;
            if (l > 0) {
                const Tensor& w = layers[l].w;
                std::vector<double> dn(w.cols(), 0.0);
                for (std::size_t j = 0; j < w.rows(); ++j) {
                    if (d[j] == 0.0) continue;
                    const double* row = &w.data[j * w.cols()];
                    for (std::size_t c = 0; c < w.cols(); ++c) dn[c] += d[j] * row[c];
                }
                for (std::size_t c = 0; c < dn.size(); ++c)
                    if (a.at(i, c) <= 0.0) dn[c] = 0.0;
                d = std::move(dn);
            }
        }
    }

    for (auto& li : imp.layers) {
        double total = 0.0;
        for (double& f : li.fisher) {
            f /= static_cast<double>(B);
            total += f;
        }
        li.p.resize(li.fisher.size());
        if (total <= 0.0) {
            li.uniform_fallback = true;
            std::fill(li.p.begin(), li.p.end(), 1.0 / static_cast<double>(li.p.size()));
        } else {
            for (std::size_t j = 0; j < li.p.size(); ++j) li.p[j] = li.fisher[j] / total;
        }
    }
    return imp;
}

std::vector<std::size_t> sample_without_replacement(const std::vector<double>& p, std::size_t n,
                                                    Rng& rng) {
    const std::size_t L = p.size();
    if (n < 1 || n > L)
        throw Error("sample_without_replacement: n=" + std::to_string(n) + " outside [1," +
                    std::to_string(L) + "]");
    std::size_t positive = 0;
    double mass = 0.0;
    for (double v : p) {
        if (v < 0.0) throw Error("sample_without_replacement: negative weight");
        if (v > 0.0) ++positive;
        mass += v;
    }
    if (positive < n)
        throw Error("sample_without_replacement: only " + std::to_string(positive) +
                    " positive-weight entries for n=" + std::to_string(n));
    if (n == L) {
        std::vector<std::size_t> all(L);
        for (std::size_t j = 0; j < L; ++j) all[j] = j;
        return all;
    }
    std::vector<double> w = p;
    std::vector<std::size_t> out;
    out.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double r = rng.uniform() * mass;
        double acc = 0.0;
        std::size_t pick = L;
        for (std::size_t j = 0; j < L; ++j) {
            if (w[j] <= 0.0) continue;
            acc += w[j];
            pick = j;
            if (r < acc) break;
        }
        out.push_back(pick);
        mass -= w[pick];
        w[pick] = 0.0;
    }
    return out;
}

std::vector<double> inclusion_probabilities(const std::vector<double>& p, std::size_t n) {
    const std::size_t L = p.size();
    if (L > 12)
        throw Error("inclusion_probabilities: L=" + std::to_string(L) +
                    " exceeds 12; estimate by Monte Carlo instead");
    if (n < 1 || n > L)
        throw Error("inclusion_probabilities: n=" + std::to_string(n) + " outside [1," +
                    std::to_string(L) + "]");
    double total = 0.0;
    std::size_t positive = 0;
    for (double v : p) {
        if (v < 0.0) throw Error("inclusion_probabilities: negative weight");
        if (v > 0.0) ++positive;
        total += v;
    }
    if (positive < n)
        throw Error("inclusion_probabilities: only " + std::to_string(positive) +
                    " positive-weight entries for n=" + std::to_string(n));
    if (n == L) return std::vector<double>(L, 1.0);

    std::vector<double> q(L);
    for (std::size_t j = 0; j < L; ++j) q[j] = p[j] / total;

    // g[S] is the probability that the set of the first popcount(S) draws
    // equals S; subsets are reached in increasing order since S\{j} < S.
    const std::size_t M = std::size_t{1} << L;
    std::vector<double> g(M, 0.0), sum(M, 0.0);
    g[0] = 1.0;
    for (std::size_t S = 1; S < M; ++S) {
        const std::size_t low = S & (~S + 1);
        const std::size_t lowj = static_cast<std::size_t>(__builtin_ctzll(S));
        sum[S] = sum[S ^ low] + q[lowj];
        double acc = 0.0;
        for (std::size_t j = 0; j < L; ++j) {
            const std::size_t bit = std::size_t{1} << j;
            if (!(S & bit) || q[j] == 0.0) continue;
            const std::size_t T = S ^ bit;
            if (g[T] == 0.0) continue;
            const double rem = 1.0 - sum[T];
            if (rem <= 0.0) continue;
            acc += g[T] * q[j] / rem;
        }
        g[S] = acc;
    }
    std::vector<double> pi(L, 0.0);
    for (std::size_t S = 1; S < M; ++S) {
        if (static_cast<std::size_t>(__builtin_popcountll(S)) != n || g[S] == 0.0) continue;
        for (std::size_t j = 0; j < L; ++j)
            if (S & (std::size_t{1} << j)) pi[j] += g[S];
    }
    return pi;
}

std::size_t selection_count(double rho, std::size_t L) {
    if (rho < 0.0 || rho > 1.0)
        throw Error("selection_count: rho=" + std::to_string(rho) + " outside [0,1]");
    if (rho == 0.0) return 0;
    // small slack so products that are mathematically integral do not get
    // ceiled up by floating-point noise
    auto c = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(L) - 1e-9));
    return std::clamp<std::size_t>(c, 1, L);
}

MaskPlan build_mask(const std::vector<std::vector<std::size_t>>& selected,
                    const UnitImportance& importance, double rho, MaskMode mode) {
    if (mode == MaskMode::None)
        throw Error("build_mask: mode None builds no plan");
    if (selected.size() != importance.layers.size())
        throw Error("build_mask: " + std::to_string(selected.size()) + " selections for " +
                    std::to_string(importance.layers.size()) + " layers");
    MaskPlan plan;
    plan.mode = mode;
    plan.modality = importance.modality;
    plan.layers.resize(selected.size());
    for (std::size_t l = 0; l < selected.size(); ++l) {
        const auto& li = importance.layers[l];
        const std::size_t L = li.p.size();
        const std::size_t want = selection_count(rho, L);
        if (selected[l].size() != want)
            throw Error("build_mask: layer " + li.layer_id + " selected " +
                        std::to_string(selected[l].size()) + " units, expected " +
                        std::to_string(want));
        std::set<std::size_t> seen;
        LayerMask& lm = plan.layers[l];
        lm.layer_id = li.layer_id;
        lm.selected = selected[l];
        lm.value.assign(L, 0.0);
        std::vector<double> pi;
        if (mode == MaskMode::TheoreticalUnbiased && want > 0)
            pi = inclusion_probabilities(li.p, want);
        for (std::size_t j : selected[l]) {
            if (j >= L || !seen.insert(j).second)
                throw Error("build_mask: bad unit index in layer " + li.layer_id);
            switch (mode) {
                case MaskMode::Amss:
                case MaskMode::UniformRandom:
                    lm.value[j] = 1.0;
                    break;
                case MaskMode::AmssPlus:
                    lm.value[j] = 1.0 / (li.p[j] + static_cast<double>(L));
                    break;
                case MaskMode::TheoreticalUnbiased:
                    if (pi[j] <= 0.0)
                        throw Error("build_mask: selected unit with zero inclusion probability in " +
                                    li.layer_id);
                    lm.value[j] = 1.0 / pi[j];
                    break;
                case MaskMode::None:
                    break;
            }
        }
    }
    return plan;
}

}  // namespace amss
