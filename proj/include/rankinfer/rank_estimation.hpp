#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rankinfer/errors.hpp"

namespace rankinfer {

struct StepDecision {
    int r = 0;
    double statistic = 0.0;
    double critical_value = 0.0;
    std::optional<double> p_value;
    bool reject = false;
};

// A per-step test: given the hypothesized rank and a significance level,
// decide whether rank(Pi0) <= r is rejected. Both the bootstrap tests and
// the KP test fit behind this signature, so estimators can be compared on
// an equal footing.
using StepEngine = std::function<StepDecision(int r, double level)>;

struct SequentialConfig {
    StepEngine engine;
    int k = 0;
    double level = 0.05;
};

struct SequentialEstimate {
    int rank = 0;
    std::vector<StepDecision> trail;
    std::vector<std::string> flags;
};

// Ascending sequential estimator: the smallest r in 0..k-1 whose test
// accepts, or k when every null is rejected.
inline SequentialEstimate sequential_estimate(const SequentialConfig& config) {
    if (config.k < 1) throw InvalidArgument("sequential_estimate: k must be >= 1");
    if (!(config.level > 0.0 && config.level < 1.0)) {
        throw InvalidArgument("sequential_estimate: level must lie in (0,1)");
    }
    if (!config.engine) throw InvalidArgument("sequential_estimate: missing engine");

    SequentialEstimate out;
    for (int r = 0; r < config.k; ++r) {
        StepDecision decision;
        try {
            decision = config.engine(r, config.level);
        } catch (const std::exception& e) {
            throw NumericalError("sequential_estimate: engine failed at step " +
                                 std::to_string(r) + ": " + e.what());
        }
        decision.r = r;
        out.trail.push_back(decision);
        if (!decision.reject) {
            out.rank = r;
            return out;
        }
    }
    out.rank = config.k;
    return out;
}

// Consistent variant: runs the sequential estimator at the shrinking level
// alpha_n(n). The rate condition tau_n^{-2} log(alpha_n) -> 0 cannot be
// decided from a finite horizon, so it is checked numerically over a
// doubling grid and a flag (not an error) is attached on violation.
inline SequentialEstimate consistent_estimate(
    const StepEngine& engine, int k, const std::function<double(double)>& alpha_of_n,
    double n, const std::function<double(double)>& tau_of_n, int horizon_doublings = 10) {
    const double alpha_n = alpha_of_n(n);
    if (!(alpha_n > 0.0 && alpha_n < 1.0)) {
        throw InvalidArgument("consistent_estimate: alpha_n must lie in (0,1)");
    }

    auto h_at = [&](double size) {
        const double a = alpha_of_n(size);
        const double tau = tau_of_n(size);
        if (!(a > 0.0 && a < 1.0) || !(tau > 0.0)) {
            return std::numeric_limits<double>::infinity();
        }
        return std::abs(std::log(a)) / (tau * tau);
    };

    const double h_first = h_at(n);
    double h_last = h_first;
    double size = n;
    for (int j = 0; j < horizon_doublings; ++j) {
        size *= 2.0;
        h_last = h_at(size);
    }
    std::vector<std::string> flags;
    if (!std::isfinite(h_last) || h_last >= h_first) {
        flags.push_back(
            "rate-check: tau^{-2} log(alpha_n) does not shrink over the checked "
            "horizon; the level sequence may decay too fast for consistency");
    }

    SequentialEstimate out = sequential_estimate({engine, k, alpha_n});
    out.flags.insert(out.flags.end(), flags.begin(), flags.end());
    return out;
}

}  // namespace rankinfer
