#include "amss/significance.hpp"

#include <cmath>

namespace amss {

SignificanceState::SignificanceState(std::size_t modalities, double lambda_, double tau_)
    : u(modalities, 0.0), lambda(lambda_), tau(tau_) {
    if (modalities < 2) throw Error("significance state needs at least 2 modalities");
    if (lambda < 0.0 || lambda > 1.0) throw Error("lambda must lie in [0,1]");
    if (tau <= 0.0) throw Error("tau must be positive");
}

double label_entropy(const Tensor& labels) {
    const std::size_t B = labels.rows(), C = labels.cols();
    if (B == 0) throw Error("label_entropy: empty batch");
    std::vector<double> counts(C, 0.0);
    for (std::size_t i = 0; i < B; ++i) {
        std::size_t ones = 0;
        for (std::size_t c = 0; c < C; ++c) {
            const double v = labels.at(i, c);
            if (v == 1.0) {
                ++ones;
                counts[c] += 1.0;
            } else if (v != 0.0) {
                throw Error("label_entropy: row " + std::to_string(i) + " is not one-hot");
            }
        }
        if (ones != 1) throw Error("label_entropy: row " + std::to_string(i) + " is not one-hot");
    }
    double h = 0.0;
    for (double c : counts) {
        if (c == 0.0) continue;
        const double p = c / static_cast<double>(B);
        h -= p * std::log(p);
    }
    return h;
}

double mi_lower_bound(const std::vector<double>& true_class_probs, double h_y) {
    if (true_class_probs.empty()) throw Error("mi_lower_bound: empty batch");
    double acc = 0.0;
    for (double p : true_class_probs) {
        if (p <= 0.0 || p > 1.0)
            throw Error("mi_lower_bound: probability " + std::to_string(p) + " outside (0,1]");
        acc += std::log(p);
    }
    return h_y + acc / static_cast<double>(true_class_probs.size());
}

double mi_rate(double mi_lb, double h_x) {
    return mi_lb / std::max(h_x, kEntropyFloor);
}

double mean_prediction_entropy(const Tensor& probs) {
    const std::size_t B = probs.rows(), C = probs.cols();
    std::vector<double> mean(C, 0.0);
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t c = 0; c < C; ++c) mean[c] += probs.at(i, c);
    double h = 0.0;
    for (double m : mean) {
        const double p = m / static_cast<double>(B);
        if (p > 0.0) h -= p * std::log(p);
    }
    return std::max(h, kEntropyFloor);
}

void update_significance(SignificanceState& state, const std::vector<double>& u_hat) {
    if (u_hat.size() != state.u.size())
        throw Error("update_significance: got " + std::to_string(u_hat.size()) +
                    " estimates for " + std::to_string(state.u.size()) + " modalities");
    if (!state.initialized) {
        state.u = u_hat;
        state.initialized = true;
        return;
    }
    for (std::size_t k = 0; k < state.u.size(); ++k)
        state.u[k] = state.lambda * state.u[k] + (1.0 - state.lambda) * u_hat[k];
}

std::vector<double> update_ratios(const SignificanceState& state) {
    std::vector<double> scaled(state.u.size());
    for (std::size_t k = 0; k < scaled.size(); ++k) scaled[k] = state.u[k] / state.tau;
    std::vector<double> rho = softmax_vec(scaled);
    for (double& r : rho) r = 1.0 - r;
    return rho;
}

}  // namespace amss
