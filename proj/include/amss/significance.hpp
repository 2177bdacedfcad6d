#pragma once
#include <vector>

#include "amss/tensor.hpp"

namespace amss {

/**
 * Per-modality significance tracker. Each batch produces an estimate
 * u_hat^(k) of the modality's mutual-information rate; the tracker keeps
 * an exponential moving average u^(k) and turns it into gradient update
 * ratios rho^(k) = 1 - softmax(u / tau)_k.
 */
struct SignificanceState {
    std::vector<double> u;
    double lambda = 0.9;
    double tau = 0.25;
    bool initialized = false;

    SignificanceState(std::size_t modalities, double lambda_, double tau_);
};

// Entropy of the empirical label distribution of a one-hot batch, in nats.
double label_entropy(const Tensor& labels);

// Barber-Agakov lower bound on I(X;Y): H(Y) + mean log q(y_i | x_i).
// May be negative when the classifier is confidently wrong.
double mi_lower_bound(const std::vector<double>& true_class_probs, double h_y);

// u_hat = mi_lb / h_x with the denominator floored to keep it finite.
double mi_rate(double mi_lb, double h_x);
inline constexpr double kEntropyFloor = 1e-6;

// Entropy of the batch-mean predictive distribution, floored; the proxy
// used for H(X^(k)).
double mean_prediction_entropy(const Tensor& probs);

// EMA update; the first call copies u_hat directly.
void update_significance(SignificanceState& state, const std::vector<double>& u_hat);

// rho^(k) = 1 - softmax(u / tau)_k. Sums to K - 1 exactly.
std::vector<double> update_ratios(const SignificanceState& state);

}  // namespace amss
