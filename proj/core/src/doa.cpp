// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "bsq/doa.hpp"

#include <algorithm>
#include <numeric>

namespace bsq {

DoaEstimate estimate_doas(const Observation& obs, const SystemConfig& cfg, const IrlsOptions& opts) {
    const int M = static_cast<int>(obs.Y.rows());
    const int T = static_cast<int>(obs.Y.cols());
    if (M != cfg.M) throw std::invalid_argument("observation antenna count mismatch");

    DoaDictionaryFamily family(cfg, obs.subcarriers);

    // Measurement ordering matches the slot-diagonal atoms: index m*T + q.
    Eigen::VectorXcd y(M * T);
    for (int m = 0; m < M; ++m)
        for (int q = 0; q < T; ++q) y[m * T + q] = obs.Y(m, q);

    IrlsOptions local = opts;
    if (local.noise_var <= 0) local.noise_var = estimate_noise_variance(obs.Y);

    DoaEstimate est;
    est.irls = run_irls(family, y, local);

    const int P = static_cast<int>(est.irls.params.size());
    std::vector<int> order(P);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return est.irls.params[a] < est.irls.params[b]; });
    est.phi.resize(P);
    est.coeffs.resize(T, P);
    for (int p = 0; p < P; ++p) {
        est.phi[p] = est.irls.params[order[p]];
        est.coeffs.col(p) = est.irls.coeffs.col(order[p]);
    }
    return est;
}

}  // namespace bsq
