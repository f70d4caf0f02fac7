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

#include "bsq/metrics.hpp"
#include "bsq/reconstruct.hpp"

using namespace bsq;

namespace {
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

std::vector<double> to_std(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}
}  // namespace

TEST_CASE("greedy pairing matches the exhaustive oracle for separated paths") {
    const SystemConfig cfg = small_config();
    std::mt19937_64 rng = make_rng(42, 0);
    for (int rep = 0; rep < 10; ++rep) {
        const PathSet truth = draw_paths(rng, 3, cfg);
        const Observation obs = observe(cfg, truth, 30.0, 100 + rep);
        const PairList greedy =
            pair_paths(to_std(truth.phi), to_std(truth.tau), obs, cfg, PairingMode::Greedy);
        const PairList exact = pair_paths(to_std(truth.phi), to_std(truth.tau), obs, cfg,
                                          PairingMode::Exhaustive);
        CHECK(greedy == exact);
        // the coherence peak sits on the true (phi_p, tau_p) pairing
        for (const auto& [pi, ti] : exact) CHECK(pi == ti);
    }
}

TEST_CASE("gain fit is exact on noiseless data with known supports") {
    const SystemConfig cfg = small_config();
    const double tau_max = 1.0 / (cfg.N * cfg.f0);
    PathSet truth;
    truth.phi = Eigen::VectorXd(3);
    truth.tau = Eigen::VectorXd(3);
    truth.beta = Eigen::VectorXcd(3);
    truth.phi << -1.1, 0.6, 2.2;
    truth.tau << 0.08 * tau_max, 0.33 * tau_max, 0.71 * tau_max;
    truth.beta << cplx(1.2, -0.3), cplx(-0.7, 0.9), cplx(0.2, 0.5);
    const Observation obs = observe(cfg, truth, kInf, 3);

    PathSet support = truth;
    support.beta.setZero();
    const Eigen::VectorXcd beta = estimate_gains(support, obs, cfg);
    REQUIRE(beta.size() == 3);
    for (int p = 0; p < 3; ++p)
        CHECK(std::abs(beta[p] - truth.beta[p]) < 1e-9);
}

TEST_CASE("rebuild matches channel_matrix") {
    const SystemConfig cfg = small_config();
    std::mt19937_64 rng = make_rng(9, 0);
    const PathSet paths = draw_paths(rng, 4, cfg);
    CHECK((rebuild_uplink(paths, cfg) - channel_matrix(paths, cfg)).norm() == 0.0);
}

TEST_CASE("end-to-end uplink estimate is near exact without noise, P = 2") {
    const SystemConfig cfg = small_config();
    const double tau_max = 1.0 / (cfg.N * cfg.f0);
    PathSet truth;
    truth.phi = Eigen::VectorXd(2);
    truth.tau = Eigen::VectorXd(2);
    truth.beta = Eigen::VectorXcd(2);
    truth.phi << -1.8321, 0.9317;
    truth.tau << 0.12 * tau_max, 0.56 * tau_max;
    truth.beta << cplx(1.0, 0.4), cplx(-0.6, 0.9);
    const Observation obs = observe(cfg, truth, kInf, 5);

    const UplinkEstimate est = estimate_uplink(obs, cfg);
    REQUIRE(est.paths.size() == 2);
    const Eigen::MatrixXcd H = channel_matrix(truth, cfg);
    CHECK(nmse(H, est.H) < 1e-6);
    CHECK(mse_angles(truth.phi, to_std(est.paths.phi)).mse < 1e-8);
}

TEST_CASE("path-count reconciliation: delays padded up to the DOA count") {
    // Two nearly equal delays with distinct angles: the delay solver may merge
    // them; the pipeline must still hand back one delay per angle.
    const SystemConfig cfg = small_config();
    const double tau_max = 1.0 / (cfg.N * cfg.f0);
    PathSet truth;
    truth.phi = Eigen::VectorXd(2);
    truth.tau = Eigen::VectorXd(2);
    truth.beta = Eigen::VectorXcd(2);
    truth.phi << -1.3, 1.1;
    truth.tau << 0.400 * tau_max, 0.404 * tau_max;
    truth.beta << cplx(1.0, 0.0), cplx(0.9, 0.1);
    const Observation obs = observe(cfg, truth, kInf, 8);

    const UplinkEstimate est = estimate_uplink(obs, cfg);
    CHECK(est.paths.size() == static_cast<int>(est.doa.phi.size()));
}

TEST_CASE("moderate-noise end-to-end reconstruction is accurate") {
    const SystemConfig cfg = small_config();
    std::mt19937_64 rng = make_rng(77, 0);
    const PathSet truth = draw_paths(rng, 3, cfg);
    const Observation obs = observe(cfg, truth, 30.0, 13);
    const UplinkEstimate est = estimate_uplink(obs, cfg);
    CHECK(nmse(channel_matrix(truth, cfg), est.H) < 0.05);
}
