#pragma once
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "amss/rng.hpp"
#include "amss/tensor.hpp"

namespace amss {

enum class Fusion { Concat, Sum, Weight };

std::string fusion_name(Fusion f);
Fusion fusion_from_name(const std::string& s);

/**
 * Architecture description. Encoders are MLPs (linear+ReLU stacks).
 * For Sum/Weight fusion every modality carries its own classifier head
 * and fusion happens on the per-modality probability vectors; Concat
 * fuses encoder outputs through a single joint classifier.
 */
struct ModelSpec {
    std::size_t modalities = 2;
    std::size_t classes = 2;
    std::vector<std::size_t> input_dims;           // d_k per modality
    std::vector<std::vector<std::size_t>> hidden;  // encoder hidden widths per modality

    Fusion fusion = Fusion::Sum;

    bool late_fusion() const { return fusion != Fusion::Concat; }
    void validate() const;
};

// Modality tag for parameters owned by the fusion side of the network.
inline constexpr int kShared = -1;

struct LinearLayer {
    std::string id;  // "m0.enc1", "m1.clf", "joint.clf"
    int modality = kShared;
    Tensor w;  // out x in
    Tensor b;  // out
};

struct LabeledBatch {
    std::vector<Tensor> x;  // per modality, B x d_k
    Tensor y;               // B x C one-hot
    std::size_t size() const { return y.rows(); }
};

struct Model {
    ModelSpec spec;
    // Per modality: encoder layers, then (late fusion only) the classifier last.
    std::vector<std::vector<LinearLayer>> branch;
    LinearLayer joint;  // Concat fusion only
    Tensor gate;        // Weight fusion logits, length K

    // Fusion coefficients at prediction time: softmax(gate) for Weight
    // fusion, uniform 1/K otherwise.
    std::vector<double> fusion_weights() const;
};

/** One row of the ordered parameter view over a model. */
struct ParamRef {
    std::string id;
    Tensor* value;
    std::string layer_id;
    int modality;
};

std::vector<ParamRef> param_store(Model& m);
LinearLayer& layer_by_id(Model& m, const std::string& id);
const LinearLayer& layer_by_id(const Model& m, const std::string& id);

using GradientSet = std::map<std::string, Tensor>;

struct ForwardCache {
    const Model* model = nullptr;
    LabeledBatch batch;
    // acts[k][l] is the input to branch layer l (acts[k][0] = x_k).
    std::vector<std::vector<Tensor>> acts;
    std::vector<Tensor> logits;   // per-branch output (late fusion)
    std::vector<Tensor> q;        // per-branch probabilities (late fusion)
    std::vector<Tensor> enc_out;  // encoder outputs (Concat)
    Tensor joint_in;
    Tensor joint_logits;
    Tensor p;                    // fused predictive distribution, B x C
    std::vector<double> alpha;   // fusion coefficients
    std::vector<double> p_true;  // clamped true-class probability per row
    double loss = 0.0;
    bool consumed = false;
};

Model build_model(const ModelSpec& spec, Rng& rng);

std::pair<double, ForwardCache> forward(const Model& m, const LabeledBatch& batch);

// Gradient of the batch-mean loss for every parameter. Each cache may be
// consumed once.
GradientSet backward(ForwardCache& cache);

Tensor predict_joint(const Model& m, const LabeledBatch& batch);

// Late fusion: softmax of branch k's head, independent of other modalities.
// Concat: the joint classifier applied with every other modality's encoder
// output replaced by zeros.
Tensor predict_unimodal(const Model& m, const LabeledBatch& batch, std::size_t k);

// Central-difference gradient of loss_fn with respect to every parameter
// in params; the callable must read the (temporarily perturbed) tensors.
GradientSet finite_diff_gradient(const std::function<double()>& loss_fn,
                                 const std::vector<ParamRef>& params, double eps);

void save_checkpoint(Model& m, const std::string& path);
void load_checkpoint(Model& m, const std::string& path);

}  // namespace amss
