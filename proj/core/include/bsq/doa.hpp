// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef BSQ_DOA_HPP
#define BSQ_DOA_HPP

#include "bsq/model.hpp"
#include "bsq/sparse_core.hpp"

namespace bsq {

/// DOA estimates for one user, sorted ascending, plus solver diagnostics.
struct DoaEstimate {
    std::vector<double> phi;      // ascending, in [-pi, pi)
    Eigen::MatrixXcd coeffs;      // T x P, column p = per-slot gains of path p
    IrlsResult irls;
};

/// Estimates the normalized DOAs from one noisy pilot observation by running
/// the block-sparse solver on the frequency-rotated steering dictionary.
/// Squint makes the per-slot responses of one path differ, which is exactly
/// the block structure the dictionary encodes; pilots enter through the
/// measurement (the dictionary is pilot-independent up to per-slot scaling
/// absorbed by the block coefficients).
DoaEstimate estimate_doas(const Observation& obs, const SystemConfig& cfg,
                          const IrlsOptions& opts = {});

}  // namespace bsq

#endif  // BSQ_DOA_HPP
