#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "amss/mask.hpp"
#include "amss/significance.hpp"
#include "amss/verify.hpp"

namespace amss {

namespace {

std::string fmt(const char* pattern, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), pattern, a, b);
    return buf;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// Shared fixture for the mask-expectation checks: five units with
// Fisher-derived sampling weights and a fixed per-unit gradient.
struct MaskBench {
    std::vector<double> fisher{4.0, 3.0, 1.0, 1.0, 1.0};
    std::vector<double> g{1.5, -2.0, 0.7, -0.3, 1.1};
    std::size_t n = 2;

    std::vector<double> p() const {
        double total = 0.0;
        for (double f : fisher) total += f;
        std::vector<double> out;
        for (double f : fisher) out.push_back(f / total);
        return out;
    }
};

constexpr std::size_t kDraws = 200000;

}  // namespace

CheckResult check_gradients() {
    constexpr double kEps = 1e-5;
    constexpr double kTol = 1e-5;
    const Fusion kinds[] = {Fusion::Concat, Fusion::Sum, Fusion::Weight};
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        ModelSpec spec;
        spec.modalities = 2;
        spec.classes = 3;
        spec.input_dims = {3, 2};
        spec.hidden = {{4}, {}};
        spec.fusion = kinds[seed % 3];
        Rng rng(seed, kStreamInit);
        Model m = build_model(spec, rng);

        LabeledBatch b;
        Rng data(seed, kStreamData);
        const std::size_t B = 5;
        for (std::size_t k = 0; k < 2; ++k) {
            Tensor x({B, spec.input_dims[k]});
            for (double& v : x.data) v = data.normal();
            b.x.push_back(std::move(x));
        }
        b.y = Tensor({B, spec.classes});
        for (std::size_t i = 0; i < B; ++i) b.y.at(i, data.index(spec.classes)) = 1.0;

        auto [loss, cache] = forward(m, b);
        (void)loss;
        const GradientSet analytic = backward(cache);
        auto params = param_store(m);
        const GradientSet numeric = finite_diff_gradient(
            [&]() { return forward(m, b).first; }, params, kEps);
        for (const auto& [id, ga] : analytic) {
            const Tensor& gn = numeric.at(id);
            for (std::size_t i = 0; i < ga.data.size(); ++i)
                worst = std::max(worst, rel_err(ga.data[i], gn.data[i]));
        }
    }
    return {"gradient check", worst <= kTol,
            fmt("max rel err %.3g (tol %.3g)", worst, kTol)};
}

CheckResult check_unbiased_estimator() {
    const MaskBench bench;
    const auto p = bench.p();
    const auto pi = inclusion_probabilities(p, bench.n);
    const std::size_t L = p.size();

    Rng rng(811, kStreamSample);
    std::vector<double> sum(L, 0.0), sumsq(L, 0.0);
    for (std::size_t d = 0; d < kDraws; ++d) {
        const auto sel = sample_without_replacement(p, bench.n, rng);
        std::vector<double> masked(L, 0.0);
        for (std::size_t j : sel) masked[j] = bench.g[j] / pi[j];
        for (std::size_t j = 0; j < L; ++j) {
            sum[j] += masked[j];
            sumsq[j] += masked[j] * masked[j];
        }
    }
    double worst_z = 0.0;
    const double N = static_cast<double>(kDraws);
    for (std::size_t j = 0; j < L; ++j) {
        const double mean = sum[j] / N;
        const double var = std::max(sumsq[j] / N - mean * mean, 0.0);
        const double se = std::sqrt(var / N);
        worst_z = std::max(worst_z, std::abs(mean - bench.g[j]) / se);
    }
    return {"unbiased estimator", worst_z <= 4.0,
            fmt("worst |mean - g| = %.3g standard errors (tol 4)", worst_z)};
}

CheckResult check_amss_bias() {
    const MaskBench bench;
    const auto p = bench.p();
    const auto pi = inclusion_probabilities(p, bench.n);
    const std::size_t L = p.size();

    Rng rng(812, kStreamSample);
    std::vector<double> sum(L, 0.0);
    for (std::size_t d = 0; d < kDraws; ++d)
        for (std::size_t j : sample_without_replacement(p, bench.n, rng)) sum[j] += bench.g[j];
    double worst = 0.0;
    for (std::size_t j = 0; j < L; ++j) {
        const double mean = sum[j] / static_cast<double>(kDraws);
        const double expected = bench.g[j] * pi[j];
        worst = std::max(worst, std::abs(mean - expected) / std::abs(expected));
    }
    return {"0/1 mask bias", worst <= 0.01,
            fmt("worst rel deviation from g*pi %.3g (tol 0.01)", worst)};
}

CheckResult check_sampling() {
    // Enumeration values for p=(0.5,0.3,0.2), n=2 over ordered draws.
    const std::vector<double> p{0.5, 0.3, 0.2};
    const std::map<std::pair<std::size_t, std::size_t>, double> expected{
        {{0, 1}, 18.0 / 35.0}, {{0, 2}, 13.0 / 40.0}, {{1, 2}, 9.0 / 56.0}};

    Rng rng(813, kStreamSample);
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
    for (std::size_t d = 0; d < kDraws; ++d) {
        auto sel = sample_without_replacement(p, 2, rng);
        std::sort(sel.begin(), sel.end());
        ++counts[{sel[0], sel[1]}];
    }
    double worst_z = 0.0;
    for (const auto& [key, q] : expected) {
        const double freq = static_cast<double>(counts[key]) / static_cast<double>(kDraws);
        const double sigma = std::sqrt(q * (1.0 - q) / static_cast<double>(kDraws));
        worst_z = std::max(worst_z, std::abs(freq - q) / sigma);
    }
    const bool freq_ok = worst_z <= 3.0;

    // Uniform weights over 5 units, n=2: all 10 subsets equally likely.
    const std::size_t kUniformDraws = 100000;
    const std::vector<double> u(5, 0.2);
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> ucounts;
    Rng urng(814, kStreamSample);
    for (std::size_t d = 0; d < kUniformDraws; ++d) {
        auto sel = sample_without_replacement(u, 2, urng);
        std::sort(sel.begin(), sel.end());
        ++ucounts[{sel[0], sel[1]}];
    }
    const double expect = static_cast<double>(kUniformDraws) / 10.0;
    double stat = 0.0;
    for (std::size_t a = 0; a < 5; ++a)
        for (std::size_t b = a + 1; b < 5; ++b) {
            const double o = static_cast<double>(ucounts[{a, b}]);
            stat += (o - expect) * (o - expect) / expect;
        }
    const boost::math::chi_squared dist(9);
    const double pvalue = boost::math::cdf(boost::math::complement(dist, stat));
    const bool gof_ok = pvalue > 0.01;

    return {"sampling distribution", freq_ok && gof_ok,
            fmt("worst subset z %.3g (tol 3); uniform GoF p %.3g (min 0.01)", worst_z, pvalue)};
}

CheckResult check_ratio_algebra() {
    double worst_sum = 0.0;
    bool in_range = true;
    Rng rng(815, kStreamSample);
    for (std::size_t K = 2; K <= 4; ++K)
        for (std::size_t trial = 0; trial < 50; ++trial) {
            // tau >= 0.25 keeps softmax(u/tau) away from exact 0/1 in doubles
            // for |u| <= 2, so the open-interval check below stays meaningful.
            SignificanceState st(K, 0.9, rng.uniform(0.25, 4.0));
            for (double& v : st.u) v = rng.uniform(-2.0, 2.0);
            st.initialized = true;
            const auto rho = update_ratios(st);
            double total = 0.0;
            for (double r : rho) {
                total += r;
                if (r <= 0.0 || r >= 1.0) in_range = false;
            }
            worst_sum = std::max(worst_sum,
                                 std::abs(total - (static_cast<double>(K) - 1.0)));
        }

    bool decreasing = true;
    double prev = 2.0;
    for (const double tau : {0.1, 0.25, 0.5, 1.0, 2.0, 4.0}) {
        SignificanceState st(2, 0.9, tau);
        st.u = {0.6, 0.2};
        st.initialized = true;
        const auto rho = update_ratios(st);
        const double disparity = std::abs(rho[0] - rho[1]);
        if (disparity >= prev) decreasing = false;
        prev = disparity;
    }
    return {"ratio algebra", worst_sum <= 1e-12 && in_range && decreasing,
            fmt("worst |sum rho - (K-1)| = %.3g (tol 1e-12)", worst_sum) +
                (in_range ? "" : "; a ratio left (0,1)") +
                (decreasing ? "; disparity strictly decreasing in tau"
                            : "; disparity NOT monotone in tau")};
}

std::vector<CheckResult> run_verify_suites() {
    return {check_gradients(), check_unbiased_estimator(), check_amss_bias(), check_sampling(),
            check_ratio_algebra()};
}

}  // namespace amss
