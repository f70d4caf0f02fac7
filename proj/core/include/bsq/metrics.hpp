// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef BSQ_METRICS_HPP
#define BSQ_METRICS_HPP

#include "bsq/model.hpp"

namespace bsq {

/// Parameter-set error under the optimal one-to-one matching. The mse field
/// is the per-true-path average: matched pairs contribute their squared
/// distance, each unmatched true path contributes its squared distance to
/// the nearest estimate (capped at pi^2), and the total is divided by the
/// true path count. Misses and false alarms are counted separately.
struct MatchStats {
    double mse = 0.0;
    int matched = 0;
    int missed = 0;
    int false_alarms = 0;
    bool flagged = false;  // empty estimate: full penalty applied
};

/// Angle-set error with wrap-aware distance on [-pi, pi).
MatchStats mse_angles(const Eigen::VectorXd& truth, const std::vector<double>& estimate);

/// Delay-set error; distances are reported in units of 1/(N*f0) so bandwidth
/// sweeps are comparable.
MatchStats mse_delays(const Eigen::VectorXd& truth, const std::vector<double>& estimate,
                      const SystemConfig& cfg);

/// Frobenius-normalized channel error ||H - Hhat||_F^2 / ||H||_F^2.
double nmse(const Eigen::MatrixXcd& H_true, const Eigen::MatrixXcd& H_hat);

}  // namespace bsq

#endif  // BSQ_METRICS_HPP
