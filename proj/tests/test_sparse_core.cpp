// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bsq/sparse_core.hpp"

using namespace bsq;

namespace {
constexpr double kPi = 3.14159265358979323846;

SystemConfig tiny_config() {
    SystemConfig cfg;
    cfg.M = 8;
    cfg.N = 32;
    cfg.K = 8;
    cfg.f0 = 1e9 / 32;
    cfg.fc_ul = 60e9;
    cfg.fc_dl = 61e9;
    return cfg;
}

std::vector<int> comb(const SystemConfig& cfg) {
    std::vector<int> sub(cfg.T());
    for (int q = 0; q < cfg.T(); ++q) sub[q] = q * cfg.K;
    return sub;
}

Eigen::VectorXcd random_cvec(std::mt19937_64& rng, int n) {
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; ++i) v[i] = draw_cn(rng, 1.0);
    return v;
}

// Definitional solve by explicit inversion of the regularized normal matrix.
Eigen::VectorXcd oracle_solve(const Eigen::MatrixXcd& D, const Eigen::VectorXcd& y,
                              const Eigen::VectorXd& bw, int B, double lambda) {
    Eigen::MatrixXcd C = D.adjoint() * D;
    for (int i = 0; i < bw.size(); ++i)
        for (int b = 0; b < B; ++b) C(i * B + b, i * B + b) += bw[i] / lambda;
    return C.inverse() * (D.adjoint() * y);
}
}  // namespace

TEST_CASE("block weights follow the reweighting rule") {
    Eigen::VectorXcd x(4);
    x << cplx(3.0, 0.0), cplx(0.0, 4.0), cplx(1.0, 0.0), cplx(0.0, 0.0);
    const Eigen::VectorXd w = block_weights(x, 2, 1e-3);
    REQUIRE(w.size() == 2);
    CHECK(w[0] == doctest::Approx(1.0 / (25.0 + 1e-3)));
    CHECK(w[1] == doctest::Approx(1.0 / (1.0 + 1e-3)));
    CHECK_THROWS(block_weights(x, 3, 1e-3));
    CHECK_THROWS(block_weights(x, 2, 0.0));
}

TEST_CASE("direct and Woodbury routes agree with the definitional inverse") {
    std::mt19937_64 rng = make_rng(31, 0);
    for (int rep = 0; rep < 8; ++rep) {
        const int mt = 24, B = 3, L = 4 + rep;  // both under- and overdetermined
        Eigen::MatrixXcd D(mt, L * B);
        for (int c = 0; c < D.cols(); ++c) D.col(c) = random_cvec(rng, mt);
        const Eigen::VectorXcd y = random_cvec(rng, mt);
        Eigen::VectorXd bw(L);
        for (int i = 0; i < L; ++i) bw[i] = 0.1 + std::abs(draw_cn(rng, 1.0));
        const double lambda = 3.7;

        const Eigen::VectorXcd x_direct =
            solve_coefficients(D, y, bw, B, lambda, SolveRoute::Direct);
        const Eigen::VectorXcd x_wood =
            solve_coefficients(D, y, bw, B, lambda, SolveRoute::Woodbury);
        const Eigen::VectorXcd x_oracle = oracle_solve(D, y, bw, B, lambda);
        CHECK((x_direct - x_wood).norm() < 1e-12 * std::max(1.0, x_oracle.norm()));
        CHECK((x_direct - x_oracle).norm() < 1e-10 * std::max(1.0, x_oracle.norm()));
    }
}

TEST_CASE("structured solves match the dense route inside the solver") {
    const SystemConfig cfg = tiny_config();
    const auto sub = comb(cfg);
    std::mt19937_64 rng = make_rng(77, 1);

    DoaDictionaryFamily doa(cfg, sub);
    DelayDictionaryFamily del(cfg, sub);
    for (const DictionaryFamily* fam : {static_cast<const DictionaryFamily*>(&doa),
                                        static_cast<const DictionaryFamily*>(&del)}) {
        const Eigen::VectorXcd y = random_cvec(rng, fam->measurement_dim());
        IrlsOptions opts;
        opts.L_initial = 12;
        opts.max_iterations = 3;
        opts.refine = false;
        opts.prune_enabled = false;
        opts.noise_var = 0.1;
        IrlsOptions dense = opts;
        dense.force_dense = true;
        const IrlsResult a = run_irls(*fam, y, opts);
        const IrlsResult b = run_irls(*fam, y, dense);
        REQUIRE(a.x.size() == b.x.size());
        CHECK((a.x - b.x).norm() < 1e-9 * std::max(1.0, b.x.norm()));
    }
}

TEST_CASE("surrogate gradient matches central finite differences") {
    const SystemConfig cfg = tiny_config();
    const auto sub = comb(cfg);
    std::mt19937_64 rng = make_rng(13, 2);
    DoaDictionaryFamily doa(cfg, sub);
    DelayDictionaryFamily del(cfg, sub);
    std::uniform_real_distribution<double> u_phi(-kPi, kPi);
    std::uniform_real_distribution<double> u_tau(1e-11, 1.0 / (cfg.N * cfg.f0));

    for (int rep = 0; rep < 10; ++rep) {
        const bool use_doa = rep % 2 == 0;
        const DictionaryFamily& fam =
            use_doa ? static_cast<const DictionaryFamily&>(doa) : del;
        const int L = 4, B = fam.block_dim();
        std::vector<double> grid(L);
        for (int i = 0; i < L; ++i) grid[i] = use_doa ? u_phi(rng) : u_tau(rng);
        const Eigen::VectorXcd y = random_cvec(rng, fam.measurement_dim());
        Eigen::VectorXd bw = Eigen::VectorXd::Constant(L, 0.5);
        const double lambda = 2.0;

        const auto solve_at = [&](const std::vector<double>& g) {
            return solve_coefficients(materialize(fam, g), y, bw, B, lambda);
        };
        const Eigen::VectorXcd x = solve_at(grid);
        const Eigen::VectorXd g_ana = surrogate_gradient(fam, grid, x, y);

        // Parameter scale differs wildly between families; scale h accordingly.
        const double h = use_doa ? 1e-6 : 1e-6 / (cfg.N * cfg.f0);
        for (int i = 0; i < L; ++i) {
            std::vector<double> gp = grid, gm = grid;
            gp[i] += h;
            gm[i] -= h;
            const double vp = surrogate(materialize(fam, gp), solve_at(gp), y);
            const double vm = surrogate(materialize(fam, gm), solve_at(gm), y);
            const double g_num = (vp - vm) / (2 * h);
            CHECK(g_ana[i] == doctest::Approx(g_num).epsilon(1e-5));
        }
    }
}

TEST_CASE("refine_grid never increases the surrogate") {
    const SystemConfig cfg = tiny_config();
    const auto sub = comb(cfg);
    DoaDictionaryFamily fam(cfg, sub);
    std::mt19937_64 rng = make_rng(3, 3);

    // One off-grid path plus noise.
    const double phi_true = 0.413;
    Eigen::VectorXcd x_true(fam.block_dim());
    for (int q = 0; q < fam.block_dim(); ++q) x_true[q] = draw_cn(rng, 1.0);
    Eigen::VectorXcd y = fam.atom(phi_true) * x_true;
    for (int i = 0; i < y.size(); ++i) y[i] += draw_cn(rng, 1e-3);

    std::vector<double> grid{0.3, 1.5};
    const Eigen::VectorXd bw = Eigen::VectorXd::Ones(2);
    IrlsOptions opts;
    const RefineResult before = refine_grid(fam, grid, y, bw, 100.0, opts);
    const Eigen::VectorXcd x0 =
        solve_coefficients(materialize(fam, grid), y, bw, fam.block_dim(), 100.0);
    const double v0 = surrogate(materialize(fam, grid), x0, y);
    CHECK(before.surrogate <= v0 + 1e-12);
    if (before.accepted) {
        CHECK(before.step > 0.0);
        // the moved grid point should head toward the true angle
        CHECK(std::abs(before.grid[0] - phi_true) < std::abs(grid[0] - phi_true));
    }
}

TEST_CASE("solver recovers two off-grid blocks and prunes the rest") {
    const SystemConfig cfg = tiny_config();
    const auto sub = comb(cfg);
    DoaDictionaryFamily fam(cfg, sub);
    std::mt19937_64 rng = make_rng(21, 4);

    const std::vector<double> truth{-1.2345, 0.8217};
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(fam.measurement_dim());
    for (double phi : truth) {
        Eigen::VectorXcd xb(fam.block_dim());
        for (int q = 0; q < fam.block_dim(); ++q) xb[q] = draw_cn(rng, 1.0);
        y += fam.atom(phi) * xb;
    }
    const double noise_var = 1e-6;
    for (int i = 0; i < y.size(); ++i) y[i] += draw_cn(rng, noise_var);

    IrlsOptions opts;
    opts.L_initial = 32;
    opts.noise_var = noise_var;
    const IrlsResult res = run_irls(fam, y, opts);
    REQUIRE(static_cast<int>(res.params.size()) == 2);
    std::vector<double> est = res.params;
    std::sort(est.begin(), est.end());
    CHECK(std::abs(est[0] - truth[0]) < 1e-3);
    CHECK(std::abs(est[1] - truth[1]) < 1e-3);
    CHECK(res.iterations >= 1);
    for (double p : res.params) {
        CHECK(p >= -kPi);
        CHECK(p < kPi);
    }
}

TEST_CASE("lambda tracks the residual-balance rule along the trace") {
    const SystemConfig cfg = tiny_config();
    const auto sub = comb(cfg);
    DoaDictionaryFamily fam(cfg, sub);
    std::mt19937_64 rng = make_rng(8, 8);
    Eigen::VectorXcd y = random_cvec(rng, fam.measurement_dim());

    IrlsOptions opts;
    opts.L_initial = 16;
    opts.max_iterations = 6;
    opts.noise_var = 0.5;
    const IrlsResult res = run_irls(fam, y, opts);
    REQUIRE(res.trace.size() >= 2);
    const double mt = fam.measurement_dim();
    for (std::size_t i = 0; i + 1 < res.trace.size(); ++i) {
        const double expect =
            std::clamp(mt / std::max(res.trace[i].residual_norm2, 1e-300), 1e-6, 1.0 / 0.5);
        CHECK(res.trace[i + 1].lambda == doctest::Approx(expect).epsilon(1e-12));
    }
    CHECK(res.trace.front().lambda == doctest::Approx(1.0 / 0.5));
}

TEST_CASE("min_blocks stops pruning from emptying the support") {
    const SystemConfig cfg = tiny_config();
    const auto sub = comb(cfg);
    DoaDictionaryFamily fam(cfg, sub);
    std::mt19937_64 rng = make_rng(6, 0);
    // pure noise: everything wants to be pruned
    const Eigen::VectorXcd y = random_cvec(rng, fam.measurement_dim());
    IrlsOptions opts;
    opts.L_initial = 16;
    opts.max_iterations = 30;
    opts.noise_var = 1.0;
    opts.mu_rel = 0.5;
    const IrlsResult res = run_irls(fam, y, opts);
    CHECK(static_cast<int>(res.params.size()) >= 1);
}

TEST_CASE("noise floor estimate lands within a small factor") {
    std::mt19937_64 rng = make_rng(17, 0);
    const int M = 64, T = 8;
    const double var = 0.01;
    Eigen::MatrixXcd Y(M, T);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < T; ++j) Y(i, j) = draw_cn(rng, var);
    const double est = estimate_noise_variance(Y);
    CHECK(est > var / 4);
    CHECK(est < var * 4);
}
