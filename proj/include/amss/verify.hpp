#pragma once
#include <string>
#include <vector>

#include "amss/model.hpp"

namespace amss {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;  // worst-case numbers, for the report line
};

/**
 * Oracle suites used by both `amss verify` and the acceptance tests. Each
 * suite pins its tolerances internally and reports the worst observed
 * deviation.
 */

// Analytic vs central finite-difference gradients (eps 1e-5, max relative
// error 1e-5, relative metric |a-b|/max(|a|,|b|,1e-8)) over 10 seeded
// models covering all fusion kinds.
CheckResult check_gradients();

// Monte Carlo unbiasedness of 1/pi masks: fixed gradient over 5 units,
// n=2, Fisher-derived sampling weights, 200k draws; per-coordinate mean
// within 4 standard errors of the plain gradient.
CheckResult check_unbiased_estimator();

// Bias of 0/1 masks: the same setup converges to g * pi within 1%
// relative per coordinate.
CheckResult check_amss_bias();

// Sampler distribution: subset frequencies for p=(0.5,0.3,0.2), n=2
// within 3 sigma of the enumeration values over 200k draws, and uniform-p
// sampling passes a chi-square goodness-of-fit test at p > 0.01.
CheckResult check_sampling();

// Ratio algebra: sum rho = K-1 within 1e-12 for randomized (u, tau, K);
// disparity strictly decreasing in tau over {0.1,0.25,0.5,1,2,4}.
CheckResult check_ratio_algebra();

std::vector<CheckResult> run_verify_suites();

}  // namespace amss
