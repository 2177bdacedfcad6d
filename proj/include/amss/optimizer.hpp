#pragma once
#include <map>
#include <string>
#include <vector>

#include "amss/mask.hpp"
#include "amss/model.hpp"

namespace amss {

/**
 * SGD with optional momentum and weight decay. Decay is added to the raw
 * gradient, and masks multiply the decayed gradient before momentum
 * accumulation, so a unit masked to zero is skipped entirely: neither its
 * parameters nor its velocity move that step.
 */
struct OptimizerState {
    double lr = 0.01;
    double momentum = 0.0;
    double decay = 0.0;
    std::map<std::string, Tensor> velocity;

    OptimizerState() = default;
    OptimizerState(double lr_, double momentum_, double decay_)
        : lr(lr_), momentum(momentum_), decay(decay_) {}
};

void sgd_step(const std::vector<ParamRef>& params, const GradientSet& grads,
              OptimizerState& state);

// Applies the plan's per-unit mask values to exactly the layers the plan
// lists; parameters outside the plan are untouched by this call.
void masked_step(Model& m, const GradientSet& grads, const MaskPlan& plan,
                 OptimizerState& state);

// Classic global-wise modulation: the whole gradient of modality k is
// scaled by v[k]; shared parameters update unscaled.
void global_scaled_step(const std::vector<ParamRef>& params, const GradientSet& grads,
                        const std::vector<double>& v, OptimizerState& state);

// Per layer, ceil(rho * L) units drawn uniformly without replacement, 0/1
// mask values.
MaskPlan uniform_mask_plan(const Model& m, std::size_t k, double rho, MaskScope scope, Rng& rng);

}  // namespace amss
