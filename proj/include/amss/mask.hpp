#pragma once
#include <string>
#include <vector>

#include "amss/model.hpp"
#include "amss/rng.hpp"

namespace amss {

enum class MaskScope { Backbone, Classifier, Both };
enum class MaskMode { None, Amss, AmssPlus, TheoreticalUnbiased, UniformRandom };

std::string scope_name(MaskScope s);
MaskScope scope_from_name(const std::string& s);

/**
 * A mask unit is one output neuron of a linear layer: its weight row plus
 * its bias entry. Units within a layer are disjoint and cover the layer.
 */
struct MaskUnit {
    std::string layer_id;
    std::size_t unit;
};

struct LayerImportance {
    std::string layer_id;
    std::vector<double> fisher;  // per-unit F_j >= 0
    std::vector<double> p;       // layer-normalized importance, sums to 1
    bool uniform_fallback = false;
};

struct UnitImportance {
    std::size_t modality = 0;
    std::vector<LayerImportance> layers;
};

struct LayerMask {
    std::string layer_id;
    std::vector<std::size_t> selected;
    std::vector<double> value;  // per unit; zero on unselected units
};

struct MaskPlan {
    MaskMode mode = MaskMode::None;
    std::size_t modality = 0;
    std::vector<LayerMask> layers;
};

// Unit list for modality k restricted to the given scope. A scope with no
// layers (Classifier on a Concat model) yields an empty list and a warning
// on stderr.
std::vector<MaskUnit> enumerate_mask_units(const Model& m, std::size_t k, MaskScope scope);

// Layer ids of modality k within scope, in branch order.
std::vector<std::string> scoped_layer_ids(const Model& m, std::size_t k, MaskScope scope);

/**
 * Empirical Fisher importance: per sample, the gradient of
 * log p(y_i | x_i) under the joint predictive distribution with respect to
 * modality k's parameters, squared, summed over each unit's span and
 * averaged over the batch. Computed exactly with B single-sample backward
 * passes. Layers whose Fisher is identically zero fall back to uniform
 * importance.
 */
UnitImportance accumulate_fisher(const Model& m, const LabeledBatch& batch, std::size_t k);

// Draws n distinct indices, each draw proportional to the remaining
// renormalized weights. Throws if fewer than n entries have positive weight.
std::vector<std::size_t> sample_without_replacement(const std::vector<double>& p, std::size_t n,
                                                    Rng& rng);

// Exact inclusion probabilities of the sampler above, by dynamic
// programming over all 2^L draw subsets. L <= 12.
std::vector<double> inclusion_probabilities(const std::vector<double>& p, std::size_t n);

// Number of units to select in a layer of L units at update ratio rho.
std::size_t selection_count(double rho, std::size_t L);

/**
 * Expands per-layer unit selections into a mask plan. Selection counts
 * must equal selection_count(rho, L) per layer. Mask values: Amss and
 * UniformRandom 1, AmssPlus 1/(p_j + L), TheoreticalUnbiased 1/pi_j.
 */
MaskPlan build_mask(const std::vector<std::vector<std::size_t>>& selected,
                    const UnitImportance& importance, double rho, MaskMode mode);

}  // namespace amss
