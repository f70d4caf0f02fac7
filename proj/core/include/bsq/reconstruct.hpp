// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef BSQ_RECONSTRUCT_HPP
#define BSQ_RECONSTRUCT_HPP

#include "bsq/delay.hpp"
#include "bsq/doa.hpp"
#include "bsq/model.hpp"

namespace bsq {

/// A matched (angle, delay) pair list. pairs[p] = (index into phi, index into tau).
using PairList = std::vector<std::pair<int, int>>;

/// Pairing strategy: greedy is the production path; exhaustive enumerates all
/// assignments and exists as an oracle for testing on small path counts.
enum class PairingMode { Greedy, Exhaustive };

/// Matches estimated angles to estimated delays by the coherence between the
/// joint path signature and the pilot-compensated observation. Sizes may
/// differ; the result has min(|phi|, |tau|) pairs, each index used once.
PairList pair_paths(const std::vector<double>& phi, const std::vector<double>& tau,
                    const Observation& obs, const SystemConfig& cfg,
                    PairingMode mode = PairingMode::Greedy);

/// Least-squares complex gains for the given paired paths against the
/// pilot-compensated observation, via the stacked signature basis. Rank
/// deficiency (nearly coincident paths) is handled by a pseudo-inverse with
/// relative tolerance 1e-10.
Eigen::VectorXcd estimate_gains(const PathSet& paths_without_gains, const Observation& obs,
                                const SystemConfig& cfg);

/// Full M x N channel from estimated path triples.
Eigen::MatrixXcd rebuild_uplink(const PathSet& paths, const SystemConfig& cfg);

/// End-to-end uplink estimate for one user.
struct UplinkEstimate {
    PathSet paths;                // paired and gain-fitted triples
    Eigen::MatrixXcd H;           // M x N reconstruction
    DoaEstimate doa;
    DelayEstimate delay;
    int doa_iterations = 0;
    int delay_iterations = 0;
};

/// Options for the end-to-end pipeline.
struct UplinkOptions {
    IrlsOptions doa;
    IrlsOptions delay;
    PairingMode pairing = PairingMode::Greedy;
    bool refine_delays = true;    // per-path 1-D polish against the full model
};

/// Runs DOA and delay estimation, reconciles the two path counts, pairs,
/// polishes the delays against the squint-aware signature, and fits gains.
UplinkEstimate estimate_uplink(const Observation& obs, const SystemConfig& cfg,
                               const UplinkOptions& opts = {});

}  // namespace bsq

#endif  // BSQ_RECONSTRUCT_HPP
