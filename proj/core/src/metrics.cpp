// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "bsq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace bsq {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kCap = kPi * kPi;

double wrap_dist(double a, double b) { return std::abs(std::remainder(a - b, 2.0 * kPi)); }

// Optimal assignment over min(P, Q) pairs with per-unmatched-truth penalty,
// by bitmask DP over the estimate set (both sets are small path lists).
MatchStats match(const std::vector<double>& truth, const std::vector<double>& est,
                 bool wrap) {
    MatchStats out;
    const int P = static_cast<int>(truth.size());
    const int Q = static_cast<int>(est.size());
    if (P == 0) throw std::invalid_argument("empty truth path set");
    if (Q == 0) {
        out.mse = kCap;
        out.missed = P;
        out.flagged = true;
        return out;
    }
    if (Q > 20) throw std::invalid_argument("estimate list too large for matching");

    std::vector<std::vector<double>> d2(P, std::vector<double>(Q));
    std::vector<double> penalty(P);
    for (int i = 0; i < P; ++i) {
        double nearest = std::numeric_limits<double>::infinity();
        for (int j = 0; j < Q; ++j) {
            const double d = wrap ? wrap_dist(truth[i], est[j]) : std::abs(truth[i] - est[j]);
            d2[i][j] = d * d;
            nearest = std::min(nearest, d2[i][j]);
        }
        penalty[i] = std::min(nearest, kCap);
    }

    const int matched_target = std::min(P, Q);
    const int nmask = 1 << Q;
    constexpr double inf = std::numeric_limits<double>::infinity();
    // dp[mask] after processing some prefix of true paths; popcount(mask) =
    // number matched so far among that prefix.
    std::vector<double> dp(nmask, inf), next(nmask);
    dp[0] = 0.0;
    for (int i = 0; i < P; ++i) {
        std::fill(next.begin(), next.end(), inf);
        for (int mask = 0; mask < nmask; ++mask) {
            if (dp[mask] == inf) continue;
            // leave true path i unmatched
            next[mask] = std::min(next[mask], dp[mask] + penalty[i]);
            for (int j = 0; j < Q; ++j) {
                if (mask & (1 << j)) continue;
                const int m2 = mask | (1 << j);
                next[m2] = std::min(next[m2], dp[mask] + d2[i][j]);
            }
        }
        dp.swap(next);
    }
    double best = inf;
    for (int mask = 0; mask < nmask; ++mask)
        if (__builtin_popcount(static_cast<unsigned>(mask)) == matched_target)
            best = std::min(best, dp[mask]);

    out.mse = best / P;
    out.matched = matched_target;
    out.missed = P - matched_target;
    out.false_alarms = std::max(0, Q - matched_target);
    return out;
}
}  // namespace

MatchStats mse_angles(const Eigen::VectorXd& truth, const std::vector<double>& estimate) {
    std::vector<double> t(truth.data(), truth.data() + truth.size());
    return match(t, estimate, /*wrap=*/true);
}

MatchStats mse_delays(const Eigen::VectorXd& truth, const std::vector<double>& estimate,
                      const SystemConfig& cfg) {
    const double unit = cfg.N * cfg.f0;  // distances in units of 1/(N*f0)
    std::vector<double> t(truth.size());
    for (int i = 0; i < truth.size(); ++i) t[i] = truth[i] * unit;
    std::vector<double> e(estimate.size());
    for (std::size_t i = 0; i < estimate.size(); ++i) e[i] = estimate[i] * unit;
    return match(t, e, /*wrap=*/false);
}

double nmse(const Eigen::MatrixXcd& H_true, const Eigen::MatrixXcd& H_hat) {
    if (H_true.rows() != H_hat.rows() || H_true.cols() != H_hat.cols())
        throw std::invalid_argument("channel dimension mismatch");
    const double denom = H_true.squaredNorm();
    if (denom <= 0) throw std::invalid_argument("zero reference channel");
    return (H_true - H_hat).squaredNorm() / denom;
}

}  // namespace bsq
