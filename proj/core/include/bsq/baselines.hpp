// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef BSQ_BASELINES_HPP
#define BSQ_BASELINES_HPP

#include "bsq/reconstruct.hpp"

namespace bsq {

/// Competitor estimators: on-grid greedy recovery, local grid refinement, and
/// the squint-ignoring / single-measurement ablations.
enum class BaselineKind { OnGridBlockOMP, GridRefinement, OffGridNoBSE, OffGridNoMMV };

/// Greedy block-OMP over an explicit block dictionary: pick the block with
/// the largest adjoint-correlation energy, jointly refit the active blocks by
/// LS, subtract, repeat until the residual energy drops below xi2 or
/// max_blocks blocks are active.
struct BlockOmpResult {
    std::vector<int> selected;   // block indices in selection order
    Eigen::MatrixXcd coeffs;     // block_dim x |selected|
    double residual2 = 0.0;
};
BlockOmpResult block_omp(const Eigen::MatrixXcd& D, int block_dim, const Eigen::VectorXcd& y,
                         double xi2, int max_blocks);

/// Residual threshold for the OMP stop rule given the noise variance.
double omp_threshold(double noise_var, int measurement_dim);

struct BaselineOptions {
    int grid_size = 128;        // L, fixed angle/delay grid
    int max_paths = 6;          // OMP sparsity cap
    double noise_var = -1.0;    // <0: estimated from the observation
    int refinement_levels = 4;  // grid_refinement only
    IrlsOptions irls;           // off-grid ablations only
};

/// On-grid block-OMP over the squint-aware steering dictionary; angles are
/// members of the fixed grid.
DoaEstimate ongrid_block_omp(const Observation& obs, const SystemConfig& cfg,
                             const BaselineOptions& opts = {});

/// On-grid block-OMP over the delay dictionary (pilot-compensated).
DelayEstimate ongrid_delay_omp(const Observation& obs, const SystemConfig& cfg,
                               const BaselineOptions& opts = {});

/// On-grid selection followed by deterministic local refinement: around each
/// selected angle, a halved-resolution local search with a joint LS refit,
/// repeated for refinement_levels levels. Level 0 equals ongrid_block_omp.
DoaEstimate grid_refinement(const Observation& obs, const SystemConfig& cfg,
                            const BaselineOptions& opts = {});

/// Off-grid solver with the frequency-flat (squint-ignoring) dictionary.
DoaEstimate offgrid_no_bse(const Observation& obs, const SystemConfig& cfg,
                           const BaselineOptions& opts = {});

/// Off-grid squint-aware solver run independently per pilot subcarrier
/// (single-measurement blocks); per-subcarrier angle lists are averaged.
DoaEstimate offgrid_no_mmv(const Observation& obs, const SystemConfig& cfg,
                           const BaselineOptions& opts = {});

/// End-to-end uplink pipeline for one baseline: its angle estimator, the
/// matching delay estimator, shared pairing/gain machinery, and a channel
/// rebuild under the baseline's own signal model (the squint-ignoring kinds
/// reconstruct without squint, as that estimator would).
UplinkEstimate estimate_uplink_baseline(BaselineKind kind, const Observation& obs,
                                        const SystemConfig& cfg, const BaselineOptions& opts = {});

}  // namespace bsq

#endif  // BSQ_BASELINES_HPP
