#include "amss/optimizer.hpp"

#include <cmath>

namespace amss {

static const Tensor& grad_for(const GradientSet& grads, const std::string& id) {
    auto it = grads.find(id);
    if (it == grads.end()) throw Error("missing gradient for parameter " + id);
    return it->second;
}

static void check_grad_finite(const Tensor& g, const std::string& id) {
    for (double v : g.data)
        if (!std::isfinite(v)) throw Error("non-finite gradient for parameter " + id);
}

// Updates one coordinate: velocity (if any) accumulates the decayed,
// scaled gradient and the parameter moves against it.
static inline void step_coord(double& w, double g, double scale, double* vel,
                              const OptimizerState& st) {
    const double geff = scale * (g + st.decay * w);
    if (vel) {
        *vel = st.momentum * *vel + geff;
        w -= st.lr * *vel;
    } else {
        w -= st.lr * geff;
    }
}

static Tensor* velocity_for(OptimizerState& st, const std::string& id, const Tensor& shape_like) {
    if (st.momentum == 0.0) return nullptr;
    auto it = st.velocity.find(id);
    if (it == st.velocity.end())
        it = st.velocity.emplace(id, Tensor(shape_like.shape)).first;
    return &it->second;
}

static void full_step(const ParamRef& pr, const Tensor& g, double scale, OptimizerState& st) {
    check_grad_finite(g, pr.id);
    if (!g.same_shape(*pr.value))
        throw Error("gradient shape " + shape_str(g.shape) + " does not match parameter " + pr.id);
    Tensor* vel = velocity_for(st, pr.id, *pr.value);
    for (std::size_t i = 0; i < g.size(); ++i)
        step_coord(pr.value->data[i], g.data[i], scale, vel ? &vel->data[i] : nullptr, st);
}

void sgd_step(const std::vector<ParamRef>& params, const GradientSet& grads,
              OptimizerState& state) {
    for (const auto& pr : params) full_step(pr, grad_for(grads, pr.id), 1.0, state);
}

void global_scaled_step(const std::vector<ParamRef>& params, const GradientSet& grads,
                        const std::vector<double>& v, OptimizerState& state) {
    for (double c : v)
        if (c <= 0.0 || c > 1.0)
            throw Error("global_scaled_step: coefficient " + std::to_string(c) + " outside (0,1]");
    for (const auto& pr : params) {
        double scale = 1.0;
        if (pr.modality >= 0) {
            if (static_cast<std::size_t>(pr.modality) >= v.size())
                throw Error("global_scaled_step: no coefficient for modality " +
                            std::to_string(pr.modality));
            scale = v[static_cast<std::size_t>(pr.modality)];
        }
        full_step(pr, grad_for(grads, pr.id), scale, state);
    }
}

void masked_step(Model& m, const GradientSet& grads, const MaskPlan& plan,
                 OptimizerState& state) {
    for (const auto& lm : plan.layers) {
        LinearLayer& L = layer_by_id(m, lm.layer_id);
        if (lm.value.size() != L.w.rows())
            throw Error("masked_step: plan for " + lm.layer_id + " has " +
                        std::to_string(lm.value.size()) + " units, layer has " +
                        std::to_string(L.w.rows()));
        const Tensor& gw = grad_for(grads, L.id + ".w");
        const Tensor& gb = grad_for(grads, L.id + ".b");
        check_grad_finite(gw, L.id + ".w");
        check_grad_finite(gb, L.id + ".b");
        if (!gw.same_shape(L.w) || !gb.same_shape(L.b))
            throw Error("masked_step: gradient shapes do not match layer " + L.id);
        Tensor* vw = velocity_for(state, L.id + ".w", L.w);
        Tensor* vb = velocity_for(state, L.id + ".b", L.b);
        const std::size_t in = L.w.cols();
        for (std::size_t j = 0; j < lm.value.size(); ++j) {
            const double mj = lm.value[j];
            if (mj == 0.0) continue;  // unselected units are untouched
            for (std::size_t c = 0; c < in; ++c)
                step_coord(L.w.data[j * in + c], gw.data[j * in + c], mj,
                           vw ? &vw->data[j * in + c] : nullptr, state);
            step_coord(L.b.data[j], gb.data[j], mj, vb ? &vb->data[j] : nullptr, state);
        }
    }
}

MaskPlan uniform_mask_plan(const Model& m, std::size_t k, double rho, MaskScope scope, Rng& rng) {
    if (rho <= 0.0 || rho > 1.0)
        throw Error("uniform_mask_plan: rho=" + std::to_string(rho) + " outside (0,1]");
    UnitImportance imp;
    imp.modality = k;
    for (const auto& id : scoped_layer_ids(m, k, scope)) {
        const LinearLayer& L = layer_by_id(m, id);
        LayerImportance li;
        li.layer_id = id;
        li.fisher.assign(L.w.rows(), 0.0);
        li.p.assign(L.w.rows(), 1.0 / static_cast<double>(L.w.rows()));
        li.uniform_fallback = true;
        imp.layers.push_back(std::move(li));
    }
    std::vector<std::vector<std::size_t>> selected;
    for (const auto& li : imp.layers)
        selected.push_back(
            sample_without_replacement(li.p, selection_count(rho, li.p.size()), rng));
    return build_mask(selected, imp, rho, MaskMode::UniformRandom);
}

}  // namespace amss
