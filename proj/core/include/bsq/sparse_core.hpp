// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef BSQ_SPARSE_CORE_HPP
#define BSQ_SPARSE_CORE_HPP

#include <vector>

#include "bsq/dict.hpp"

namespace bsq {

/// Which factorization route a regularized LS solve takes. Auto picks
/// Woodbury when the coefficient dimension exceeds the measurement dimension.
enum class SolveRoute { Auto, Direct, Woodbury };

/// Options for the block-sparse reweighted solver.
struct IrlsOptions {
    double epsilon = 1e-3;              // weight smoothing, w_i = 1/(|x_i|^2 + epsilon)
    double mu_rel = 1e-2;               // prune blocks with energy <= mu_rel * max energy
    double mu_abs = 0.0;                // ... or <= mu_abs, whichever is larger
    double eta_rel = 1e-4;              // stop when ||dx|| < eta_rel * ||x||
    int max_iterations = 200;
    double step_shrink = 0.5;           // backtracking shrink factor
    int max_backtracks = 30;
    double initial_step_fraction = 0.2; // first trial step, as a fraction of grid spacing
    int L_initial = 128;                // initial grid size
    double lambda0 = -1.0;              // <0: initialize as 1/noise_var
    double noise_var = -1.0;            // <0: crude estimate from ||y||
    bool refine = true;                 // off-grid gradient refinement on/off
    bool prune_enabled = true;
    bool force_dense = false;           // bypass the structured fast paths
    std::vector<double> initial_grid;   // empty: family.initial_grid(L_initial)
    int min_blocks = 1;                 // pruning never drops below this count
    // Cap on surviving blocks after each prune (<=0: auto, 3/4 of the count
    // that would make the active system square). Keeping the regularized LS
    // overdetermined prevents the interpolation regime, where the residual
    // collapses to zero, lambda blows up, and block energies stop reflecting
    // path strength (near-collinear neighbours cancel with huge coefficients).
    int max_active = 0;
};

/// Per-iteration solver trace.
struct IrlsTraceRow {
    int iteration = 0;
    double surrogate = 0.0;
    double lambda = 0.0;
    double residual_norm2 = 0.0;
    int active_blocks = 0;
    double step = 0.0;
    int backtracks = 0;
};

/// Output of the block-sparse solver.
struct IrlsResult {
    std::vector<double> params;   // surviving block parameters (canonicalized)
    Eigen::MatrixXcd coeffs;      // block_dim x L, block i = column i
    Eigen::VectorXcd x;           // stacked coefficient vector (L * block_dim)
    double lambda = 0.0;
    double noise_var = 0.0;
    int iterations = 0;
    bool converged = false;
    bool ridge_fallback = false;  // a solve needed diagonal loading
    std::vector<IrlsTraceRow> trace;
};

/// Block reweighting: w_i = 1 / (||x[i]||^2 + epsilon), one weight per block.
Eigen::VectorXd block_weights(const Eigen::VectorXcd& x, int block_dim, double epsilon);

/// Regularized LS x = (D^H D + (1/lambda) diag(w))^{-1} D^H y over a dense
/// dictionary, with the weight of block i applied to all its coefficients.
/// Direct and Woodbury routes agree to machine precision; Auto picks Woodbury
/// when columns outnumber rows. On a failed factorization a small diagonal
/// ridge is added and *ridge_fallback (if given) is set.
Eigen::VectorXcd solve_coefficients(const Eigen::MatrixXcd& D, const Eigen::VectorXcd& y,
                                    const Eigen::VectorXd& block_w, int block_dim, double lambda,
                                    SolveRoute route = SolveRoute::Auto,
                                    bool* ridge_fallback = nullptr);

/// Majorization surrogate v = -Re(y^H D x); nonpositive at the LS solution.
double surrogate(const Eigen::MatrixXcd& D, const Eigen::VectorXcd& x, const Eigen::VectorXcd& y);

/// Gradient of the surrogate with respect to the block parameters:
/// dv/dp_i = -2 Re((dD_i/dp_i x[i])^H (y - D x)).
Eigen::VectorXd surrogate_gradient(const DictionaryFamily& family, const std::vector<double>& grid,
                                   const Eigen::VectorXcd& x, const Eigen::VectorXcd& y);

/// One gradient step on the grid with a backtracking line search: the step is
/// accepted only if the surrogate does not increase.
struct RefineResult {
    std::vector<double> grid;
    Eigen::VectorXcd x;
    double surrogate = 0.0;
    double step = 0.0;
    int backtracks = 0;
    bool accepted = false;
};
RefineResult refine_grid(const DictionaryFamily& family, const std::vector<double>& grid,
                         const Eigen::VectorXcd& y, const Eigen::VectorXd& block_w, double lambda,
                         const IrlsOptions& opts = {});

/// Crude noise floor estimate from the two smallest singular values of the
/// observation matrix (valid when the path count is below the column count).
double estimate_noise_variance(const Eigen::MatrixXcd& Y);

/// Block-sparse iteratively reweighted solver with off-grid refinement.
IrlsResult run_irls(const DictionaryFamily& family, const Eigen::VectorXcd& y,
                    const IrlsOptions& opts = {});

}  // namespace bsq

#endif  // BSQ_SPARSE_CORE_HPP
