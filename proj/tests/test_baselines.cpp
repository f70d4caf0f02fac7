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
#include <limits>

#include "bsq/baselines.hpp"
#include "bsq/dict.hpp"
#include "bsq/metrics.hpp"

using namespace bsq;

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();

SystemConfig small_config() {
    SystemConfig cfg;
    cfg.M = 16;
    cfg.N = 64;
    cfg.K = 8;
    cfg.f0 = 1e9 / 64;
    return cfg;
}

Observation observe(const SystemConfig& cfg, const PathSet& paths, double snr_db,
                    std::uint64_t seed) {
    std::mt19937_64 rng = make_rng(seed, 99);
    const PilotAllocation alloc = allocate_pilots(cfg, 1, true);
    return observe_uplink(channel_matrix(paths, cfg), alloc, 0, snr_db, rng);
}

double wrap_dist(double a, double b) { return std::abs(std::remainder(a - b, 2 * kPi)); }

double grid_point(const SystemConfig& cfg, int L, int idx) {
    DoaDictionaryFamily fam(cfg, {0});
    return fam.initial_grid(L)[idx];
}
}  // namespace

TEST_CASE("block_omp recovers an exactly representable two-block signal") {
    std::mt19937_64 rng = make_rng(4, 0);
    const int mt = 40, B = 4, L = 10;
    Eigen::MatrixXcd D(mt, L * B);
    for (int c = 0; c < D.cols(); ++c)
        for (int r = 0; r < mt; ++r) D(r, c) = draw_cn(rng, 1.0);
    Eigen::VectorXcd x0(B), x1(B);
    for (int b = 0; b < B; ++b) {
        x0[b] = draw_cn(rng, 1.0);
        x1[b] = draw_cn(rng, 1.0);
    }
    const Eigen::VectorXcd y = D.middleCols(2 * B, B) * x0 + D.middleCols(7 * B, B) * x1;

    const BlockOmpResult res = block_omp(D, B, y, 1e-18, 6);
    REQUIRE(res.selected.size() == 2);
    std::vector<int> sel = res.selected;
    std::sort(sel.begin(), sel.end());
    CHECK(sel[0] == 2);
    CHECK(sel[1] == 7);
    CHECK(res.residual2 < 1e-15 * y.squaredNorm());
}

TEST_CASE("on-grid OMP returns grid members and is exact for on-grid angles") {
    const SystemConfig cfg = small_config();
    BaselineOptions opts;
    opts.grid_size = 64;
    opts.max_paths = 4;

    PathSet truth;
    truth.phi = Eigen::VectorXd(2);
    truth.tau = Eigen::VectorXd(2);
    truth.beta = Eigen::VectorXcd(2);
    truth.tau << 8e-9, 3.3e-8;
    truth.beta << cplx(1.0, 0.3), cplx(-0.4, 0.8);
    // place the angles exactly on the L=64 grid
    truth.phi << grid_point(cfg, 64, 10), grid_point(cfg, 64, 40);
    const Observation obs = observe(cfg, truth, kInf, 1);

    const DoaEstimate est = ongrid_block_omp(obs, cfg, opts);
    REQUIRE(est.phi.size() == 2);
    DoaDictionaryFamily fam(cfg, obs.subcarriers);
    const std::vector<double> grid = fam.initial_grid(64);
    for (double p : est.phi) {
        double nearest = 1e9;
        for (double g : grid) nearest = std::min(nearest, wrap_dist(p, g));
        CHECK(nearest < 1e-12);  // estimates are members of the fixed grid
    }
    CHECK(wrap_dist(est.phi[0], truth.phi[0]) < 1e-10);
    CHECK(wrap_dist(est.phi[1], truth.phi[1]) < 1e-10);
}

TEST_CASE("on-grid OMP shows the expected quantization error off grid") {
    const SystemConfig cfg = small_config();
    BaselineOptions opts;
    opts.grid_size = 64;
    opts.max_paths = 2;
    const double delta = 2 * kPi / 64;

    // an angle parked mid-cell must quantize with error close to delta/2
    PathSet truth;
    truth.phi = Eigen::VectorXd::Constant(1, grid_point(cfg, 64, 20) + 0.5 * delta);
    truth.tau = Eigen::VectorXd::Constant(1, 2e-8);
    truth.beta = Eigen::VectorXcd::Constant(1, cplx(1.0, 0.0));
    const Observation obs = observe(cfg, truth, kInf, 2);

    const DoaEstimate est = ongrid_block_omp(obs, cfg, opts);
    REQUIRE(est.phi.size() >= 1);
    double err = 1e9;
    for (double p : est.phi) err = std::min(err, wrap_dist(p, truth.phi[0]));
    CHECK(err > 0.3 * delta);
    CHECK(err < 0.7 * delta);
}

TEST_CASE("grid refinement beats raw quantization and level 0 matches OMP") {
    const SystemConfig cfg = small_config();
    BaselineOptions opts;
    opts.grid_size = 64;
    opts.max_paths = 2;
    const double delta = 2 * kPi / 64;

    PathSet truth;
    truth.phi = Eigen::VectorXd::Constant(1, 0.7431);  // generic off-grid angle
    truth.tau = Eigen::VectorXd::Constant(1, 2.4e-8);
    truth.beta = Eigen::VectorXcd::Constant(1, cplx(1.0, -0.2));
    const Observation obs = observe(cfg, truth, kInf, 3);

    BaselineOptions level0 = opts;
    level0.refinement_levels = 0;
    const DoaEstimate omp = ongrid_block_omp(obs, cfg, opts);
    const DoaEstimate ref0 = grid_refinement(obs, cfg, level0);
    REQUIRE(omp.phi.size() == ref0.phi.size());
    for (std::size_t i = 0; i < omp.phi.size(); ++i)
        CHECK(ref0.phi[i] == doctest::Approx(omp.phi[i]).epsilon(1e-12));

    const DoaEstimate ref = grid_refinement(obs, cfg, opts);
    REQUIRE(ref.phi.size() >= 1);
    double err_omp = 1e9, err_ref = 1e9;
    for (double p : omp.phi) err_omp = std::min(err_omp, wrap_dist(p, truth.phi[0]));
    for (double p : ref.phi) err_ref = std::min(err_ref, wrap_dist(p, truth.phi[0]));
    CHECK(err_ref < err_omp);
    CHECK(err_ref < delta / std::pow(2.0, opts.refinement_levels));
}

TEST_CASE("on-grid delay OMP: single grid path exact, estimates stay on the grid") {
    // Small angle so the squint-induced per-antenna delay shift is far below
    // the grid spacing. Exactness is only claimed for a single path: the whole
    // delay domain spans about one Rayleigh cell of the band, so with several
    // paths the (heavily correlated) greedy selection is merely approximate.
    const SystemConfig cfg = small_config();
    BaselineOptions opts;
    opts.grid_size = 16;
    opts.max_paths = 3;

    DelayDictionaryFamily fam(cfg, {0});
    const std::vector<double> grid = fam.initial_grid(16);
    const double spacing = grid[1] - grid[0];
    std::mt19937_64 rng = make_rng(4, 99);
    const PilotAllocation comb = allocate_pilots(cfg, 1, false);

    PathSet one;
    one.phi = Eigen::VectorXd::Constant(1, 0.05);
    one.tau = Eigen::VectorXd::Constant(1, grid[11]);
    one.beta = Eigen::VectorXcd::Constant(1, cplx(0.9, 0.1));
    const Observation obs1 =
        observe_uplink(channel_matrix(one, cfg), comb, 0, kInf, rng);
    const DelayEstimate single = ongrid_delay_omp(obs1, cfg, opts);
    REQUIRE(single.tau.size() >= 1);
    double err1 = 1e9;
    for (double e : single.tau) err1 = std::min(err1, std::abs(e - grid[11]));
    CHECK(err1 < 1e-9 * spacing);

    PathSet two;
    two.phi = Eigen::VectorXd(2);
    two.tau = Eigen::VectorXd(2);
    two.beta = Eigen::VectorXcd(2);
    two.phi << -0.03, 0.05;
    two.tau << grid[3], grid[11];
    two.beta << cplx(0.9, 0.1), cplx(-0.3, 1.0);
    const Observation obs2 =
        observe_uplink(channel_matrix(two, cfg), comb, 0, kInf, rng);
    const DelayEstimate est = ongrid_delay_omp(obs2, cfg, opts);
    REQUIRE(!est.tau.empty());
    for (double e : est.tau) {
        double snap = 1e9;
        for (double g : grid) snap = std::min(snap, std::abs(e - g));
        CHECK(snap < 1e-12 * spacing);  // grid membership
    }
}

TEST_CASE("squint-ignoring ablation works at narrow band, degrades when wide") {
    SystemConfig narrow = small_config();
    narrow.f0 = 20e6 / narrow.N;  // 20 MHz total: squint negligible
    SystemConfig wide = small_config();
    wide.f0 = 2e9 / wide.N;  // 2 GHz total: squint dominant, M modest

    PathSet truth;
    truth.phi = Eigen::VectorXd::Constant(1, 2.4);
    truth.tau = Eigen::VectorXd::Constant(1, 0.3 / (narrow.N * narrow.f0));
    truth.beta = Eigen::VectorXcd::Constant(1, cplx(1.0, 0.5));
    PathSet truth_wide = truth;
    truth_wide.tau[0] = 0.3 / (wide.N * wide.f0);

    BaselineOptions opts;
    const DoaEstimate nb = offgrid_no_bse(observe(narrow, truth, kInf, 5), narrow, opts);
    REQUIRE(nb.phi.size() >= 1);
    double err_nb = 1e9;
    for (double p : nb.phi) err_nb = std::min(err_nb, wrap_dist(p, truth.phi[0]));
    CHECK(err_nb < 1e-3);

    const DoaEstimate wb = offgrid_no_bse(observe(wide, truth_wide, kInf, 5), wide, opts);
    double err_wb = 1e9;
    for (double p : wb.phi) err_wb = std::min(err_wb, wrap_dist(p, truth.phi[0]));
    CHECK(err_wb > 5 * std::max(err_nb, 1e-6));
}

TEST_CASE("single-measurement ablation recovers a clean single path") {
    const SystemConfig cfg = small_config();
    PathSet truth;
    truth.phi = Eigen::VectorXd::Constant(1, -1.05);
    truth.tau = Eigen::VectorXd::Constant(1, 2.2e-8);
    truth.beta = Eigen::VectorXcd::Constant(1, cplx(1.0, 0.0));
    const Observation obs = observe(cfg, truth, kInf, 6);
    const DoaEstimate est = offgrid_no_mmv(obs, cfg, {});
    REQUIRE(est.phi.size() >= 1);
    double err = 1e9;
    for (double p : est.phi) err = std::min(err, wrap_dist(p, truth.phi[0]));
    CHECK(err < 1e-3);
}

TEST_CASE("baseline end-to-end pipelines produce finite reconstructions") {
    const SystemConfig cfg = small_config();
    std::mt19937_64 rng = make_rng(11, 0);
    const PathSet truth = draw_paths(rng, 2, cfg);
    const Observation obs = observe(cfg, truth, 20.0, 7);
    const Eigen::MatrixXcd H = channel_matrix(truth, cfg);
    for (BaselineKind kind : {BaselineKind::OnGridBlockOMP, BaselineKind::GridRefinement,
                              BaselineKind::OffGridNoBSE, BaselineKind::OffGridNoMMV}) {
        const UplinkEstimate est = estimate_uplink_baseline(kind, obs, cfg);
        REQUIRE(est.H.rows() == cfg.M);
        REQUIRE(est.H.cols() == cfg.N);
        CHECK(std::isfinite(nmse(H, est.H)));
    }
}
