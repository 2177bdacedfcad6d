#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "amss/model.hpp"
#include "amss/rng.hpp"

namespace amss {

/**
 * Synthetic multi-modal data: per class c and modality k a random unit
 * prototype mu_c^(k); samples are s_k * mu_c^(k) + standard normal noise.
 * The per-modality SNR s_k is the dominance knob: a larger s_k makes that
 * modality more linearly separable.
 */
struct DataSpec {
    std::size_t modalities = 2;
    std::size_t classes = 4;
    std::vector<std::size_t> dims;  // d_k
    std::vector<double> snr;        // s_k >= 0
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Dataset {
    DataSpec spec;
    LabeledBatch train, val, test;
    // C x d_k unit prototype rows per modality; populated by generate(),
    // not stored in dataset files.
    std::vector<Tensor> prototypes;
};

std::vector<Tensor> draw_prototypes(Rng& rng, std::size_t classes,
                                    const std::vector<std::size_t>& dims);

Dataset generate(const DataSpec& spec);

// Plain-text dataset file: one `# {json spec}` header line, then rows
// `split,label,<modality 1 fields>,<modality 2 fields>,...` with doubles
// at 17 significant digits for exact round-trip.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

LabeledBatch gather(const LabeledBatch& b, const std::vector<std::size_t>& idx);

}  // namespace amss
