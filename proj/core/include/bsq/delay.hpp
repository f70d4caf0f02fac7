// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef BSQ_DELAY_HPP
#define BSQ_DELAY_HPP

#include "bsq/model.hpp"
#include "bsq/sparse_core.hpp"

namespace bsq {

/// Delay estimates for one user, sorted ascending, plus solver diagnostics.
struct DelayEstimate {
    std::vector<double> tau;      // ascending, in [0, 1/f0)
    Eigen::MatrixXcd coeffs;      // M x P, column p = per-antenna gains of path p
    IrlsResult irls;
};

/// Estimates the path delays from one noisy pilot observation by running the
/// block-sparse solver on the delay-phase dictionary. Pilots are compensated
/// up front (the per-subcarrier delay phase would otherwise be scrambled by
/// the pilot phases); the per-antenna responses of one path form the block.
DelayEstimate estimate_delays(const Observation& obs, const SystemConfig& cfg,
                              const IrlsOptions& opts = {});

}  // namespace bsq

#endif  // BSQ_DELAY_HPP
