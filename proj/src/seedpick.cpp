#include <cmath>
#include <string>
#include <vector>

#include "amss/harness.hpp"

namespace amss {

namespace {

constexpr double kAmbiguousDist = 0.15;
constexpr double kClearDist = 0.6;
constexpr double kSeparatedDist = 1.2;
constexpr double kAloneLo = 0.70;
constexpr double kAloneHi = 0.80;
constexpr double kJointGain = 0.08;
constexpr std::size_t kBayesSamples = 4000;
constexpr std::uint64_t kBayesStream = 99;

std::vector<double> pair_distances(const Tensor& protos) {
    std::vector<double> d;
    for (std::size_t a = 0; a < protos.rows(); ++a)
        for (std::size_t b = a + 1; b < protos.rows(); ++b) {
            double s = 0.0;
            for (std::size_t j = 0; j < protos.cols(); ++j) {
                const double diff = protos.at(a, j) - protos.at(b, j);
                s += diff * diff;
            }
            d.push_back(std::sqrt(s));
        }
    return d;
}

// One pair of modality-0 prototypes nearly collides, everything else is
// clearly apart, and modality 1 separates all classes.
bool geometry_ok(const std::vector<Tensor>& protos) {
    std::size_t ambiguous = 0;
    for (const double d : pair_distances(protos[0])) {
        if (d <= kAmbiguousDist)
            ++ambiguous;
        else if (d < kClearDist)
            return false;
    }
    if (ambiguous != 1) return false;
    for (const double d : pair_distances(protos[1]))
        if (d < kSeparatedDist) return false;
    return true;
}

// Monte Carlo accuracy of the exact Bayes rule under the generating
// mixture, for modality 0 alone and for both modalities jointly. With
// unit prototypes and unit noise the log-likelihood of class c reduces to
// x . (s mu_c) - s^2 / 2 per modality.
void bayes_accuracy(const DataSpec& s, const std::vector<Tensor>& protos, double& alone,
                    double& joint) {
    Rng rng(s.seed, kBayesStream);
    const std::size_t C = s.classes;
    std::size_t hit_alone = 0, hit_joint = 0;
    std::vector<std::vector<double>> x(s.modalities);
    for (std::size_t i = 0; i < kBayesSamples; ++i) {
        const std::size_t c = i % C;
        for (std::size_t k = 0; k < s.modalities; ++k) {
            x[k].assign(s.dims[k], 0.0);
            for (std::size_t j = 0; j < s.dims[k]; ++j)
                x[k][j] = s.snr[k] * protos[k].at(c, j) + rng.normal();
        }
        std::size_t best_alone = 0, best_joint = 0;
        double top_alone = -1e300, top_joint = -1e300;
        for (std::size_t cand = 0; cand < C; ++cand) {
            double total = 0.0;
            double first = 0.0;
            for (std::size_t k = 0; k < s.modalities; ++k) {
                double dot = 0.0;
                for (std::size_t j = 0; j < s.dims[k]; ++j)
                    dot += x[k][j] * protos[k].at(cand, j);
                const double score = s.snr[k] * dot - 0.5 * s.snr[k] * s.snr[k];
                total += score;
                if (k == 0) first = score;
            }
            if (first > top_alone) {
                top_alone = first;
                best_alone = cand;
            }
            if (total > top_joint) {
                top_joint = total;
                best_joint = cand;
            }
        }
        if (best_alone == c) ++hit_alone;
        if (best_joint == c) ++hit_joint;
    }
    alone = static_cast<double>(hit_alone) / static_cast<double>(kBayesSamples);
    joint = static_cast<double>(hit_joint) / static_cast<double>(kBayesSamples);
}

}  // namespace

std::uint64_t select_data_seed(const DataSpec& base, std::uint64_t lo, std::uint64_t hi) {
    if (base.modalities != 2) throw Error("seed screen covers two-modality specs");
    if (lo > hi) throw Error("empty seed range");
    for (std::uint64_t seed = lo; seed <= hi; ++seed) {
        DataSpec s = base;
        s.seed = seed;
        Rng rng(seed, kStreamData);
        const auto protos = draw_prototypes(rng, s.classes, s.dims);
        if (!geometry_ok(protos)) continue;
        double alone = 0.0, joint = 0.0;
        bayes_accuracy(s, protos, alone, joint);
        if (alone < kAloneLo || alone > kAloneHi) continue;
        if (joint < alone + kJointGain) continue;
        return seed;
    }
    throw Error("no data seed in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                "] passes the screen");
}

}  // namespace amss
