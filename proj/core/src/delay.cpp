// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "bsq/delay.hpp"

#include <algorithm>
#include <numeric>

namespace bsq {

DelayEstimate estimate_delays(const Observation& obs, const SystemConfig& cfg,
                              const IrlsOptions& opts) {
    const int M = static_cast<int>(obs.Y.rows());
    const int T = static_cast<int>(obs.Y.cols());
    if (M != cfg.M) throw std::invalid_argument("observation antenna count mismatch");
    if (obs.pilot.size() != T) throw std::invalid_argument("pilot length mismatch");

    DelayDictionaryFamily family(cfg, obs.subcarriers);

    // Pilot compensation, then column-major stacking (index q*M + m) to match
    // the kernel (x) identity atoms.
    Eigen::MatrixXcd Yc(M, T);
    for (int q = 0; q < T; ++q) Yc.col(q) = obs.Y.col(q) / obs.pilot[q];
    const Eigen::VectorXcd y = Eigen::Map<const Eigen::VectorXcd>(Yc.data(), Yc.size());

    IrlsOptions local = opts;
    if (local.noise_var <= 0) local.noise_var = estimate_noise_variance(Yc);

    DelayEstimate est;
    est.irls = run_irls(family, y, local);

    const int P = static_cast<int>(est.irls.params.size());
    std::vector<int> order(P);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return est.irls.params[a] < est.irls.params[b]; });
    est.tau.resize(P);
    est.coeffs.resize(M, P);
    for (int p = 0; p < P; ++p) {
        est.tau[p] = est.irls.params[order[p]];
        est.coeffs.col(p) = est.irls.coeffs.col(order[p]);
    }
    return est;
}

}  // namespace bsq
