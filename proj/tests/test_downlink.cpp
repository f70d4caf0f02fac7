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
#include <cstring>
#include <limits>

#include "bsq/downlink.hpp"
#include "bsq/metrics.hpp"

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
}  // namespace

TEST_CASE("reciprocity rescales the normalized angle with the carrier ratio") {
    const SystemConfig cfg = small_config();  // fc_ul = 60 GHz, fc_dl = 61 GHz
    PathSet ul;
    ul.phi = Eigen::VectorXd::Constant(1, 0.60);
    ul.tau = Eigen::VectorXd::Constant(1, 2e-8);
    ul.beta = Eigen::VectorXcd::Constant(1, cplx(1.0, 2.0));

    const PathSet dl = reciprocal_params(ul, cfg);
    CHECK(dl.phi[0] == doctest::Approx(0.60 * 61.0 / 60.0).epsilon(1e-14));
    CHECK(dl.tau[0] == ul.tau[0]);
    CHECK(dl.beta[0] == cplx(0.0, 0.0));

    DownlinkOptions keep;
    keep.rescale_normalized_angle = false;
    CHECK(reciprocal_params(ul, cfg, keep).phi[0] == 0.60);

    // A normalized angle outside the physical domain is invalid. At half-wave
    // spacing every phi in [-pi, pi) maps to a valid sin(theta), so shrink the
    // spacing to make the angle unphysical.
    SystemConfig narrow_spacing = cfg;
    narrow_spacing.d_over_lambda = 0.25;
    PathSet edge = ul;
    edge.phi[0] = 3.13;  // sin(theta) = 3.13 / (pi/2) ~ 1.99
    CHECK_THROWS(reciprocal_params(edge, narrow_spacing));
}

TEST_CASE("beamforming columns have unit scaling 1/(M*T) * vec") {
    const SystemConfig cfg = small_config();
    PathSet dl;
    dl.phi = Eigen::VectorXd::Constant(1, -0.9);
    dl.tau = Eigen::VectorXd::Constant(1, 3e-8);
    dl.beta = Eigen::VectorXcd::Zero(1);
    std::vector<int> sub(cfg.T());
    for (int q = 0; q < cfg.T(); ++q) sub[q] = q;

    const Eigen::MatrixXcd F = beamforming_matrix(dl, cfg, sub);
    REQUIRE(F.rows() == cfg.M * cfg.T());
    REQUIRE(F.cols() == 1);
    // every signature entry is unit modulus, so the column norm is fixed
    const double mt = static_cast<double>(cfg.M) * cfg.T();
    CHECK(F.col(0).norm() == doctest::Approx(1.0 / std::sqrt(mt)).epsilon(1e-12));

    const Eigen::MatrixXcd Xi = path_signature(dl.phi[0], dl.tau[0], cfg, sub, Carrier::Downlink);
    for (int q = 0; q < cfg.T(); ++q)
        for (int m = 0; m < cfg.M; ++m)
            CHECK(std::abs(F(q * cfg.M + m, 0) - Xi(m, q) / mt) < 1e-14);
}

TEST_CASE("downlink pilot rows are orthonormal") {
    for (int P : {1, 3, 8}) {
        const Eigen::MatrixXcd S = downlink_pilots(P, 8);
        REQUIRE(S.rows() == P);
        REQUIRE(S.cols() == 8);
        const Eigen::MatrixXcd G = S * S.adjoint();
        CHECK((G - Eigen::MatrixXcd::Identity(P, P)).norm() < 1e-12);
    }
    CHECK_THROWS(downlink_pilots(9, 8));
}

TEST_CASE("single-path downlink reconstruction is exact without noise") {
    const SystemConfig cfg = small_config();
    PathSet truth;
    truth.phi = Eigen::VectorXd::Constant(1, 0.8123);
    truth.tau = Eigen::VectorXd::Constant(1, 2.7e-8);
    truth.beta = Eigen::VectorXcd::Constant(1, cplx(0.9, -0.4));

    // Perfect uplink knowledge: feed the true parameters through the pipeline.
    UplinkEstimate ul;
    ul.paths = truth;
    ul.paths.phi[0] = truth.phi[0] * cfg.fc_ul / cfg.fc_dl;  // uplink convention
    ul.H = channel_matrix(ul.paths, cfg);

    PathSet true_dl = truth;
    const Eigen::MatrixXcd H_dl = channel_matrix(true_dl, cfg, Carrier::Downlink);
    std::mt19937_64 rng = make_rng(5, 0);
    const DownlinkEstimate est = estimate_downlink(ul, true_dl, kInf, rng, cfg);
    CHECK(nmse(H_dl, est.H_dl) < 1e-9);
    CHECK(std::abs(est.beta_dl[0] - truth.beta[0]) < 1e-9);
}

TEST_CASE("feedback payload is P pairs of little-endian doubles") {
    Eigen::VectorXcd beta(2);
    beta << cplx(1.0, -2.0), cplx(0.5, 3.25);
    const std::string payload = serialize_feedback(beta);
    REQUIRE(payload.size() == 2 * 2 * sizeof(double));

    // Known-answer check for the first double (1.0) independent of host order.
    const unsigned char one_le[8] = {0, 0, 0, 0, 0, 0, 0xf0, 0x3f};
    CHECK(std::memcmp(payload.data(), one_le, 8) == 0);
    // and for -2.0
    const unsigned char minus_two_le[8] = {0, 0, 0, 0, 0, 0, 0, 0xc0};
    CHECK(std::memcmp(payload.data() + 8, minus_two_le, 8) == 0);

    const Eigen::VectorXcd back = parse_feedback(payload);
    REQUIRE(back.size() == 2);
    CHECK(back[0] == beta[0]);
    CHECK(back[1] == beta[1]);

    CHECK_THROWS(parse_feedback(payload.substr(0, 15)));
}

TEST_CASE("noisy feedback degrades gracefully with SNR") {
    const SystemConfig cfg = small_config();
    PathSet truth;
    truth.phi = Eigen::VectorXd::Constant(1, -0.4);
    truth.tau = Eigen::VectorXd::Constant(1, 1.2e-8);
    truth.beta = Eigen::VectorXcd::Constant(1, cplx(1.0, 0.0));
    UplinkEstimate ul;
    ul.paths = truth;
    ul.paths.phi[0] = truth.phi[0] * cfg.fc_ul / cfg.fc_dl;

    const Eigen::MatrixXcd H_dl = channel_matrix(truth, cfg, Carrier::Downlink);
    double prev = -1.0;
    for (double snr : {0.0, 20.0, 40.0}) {
        double acc = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            std::mt19937_64 rng = make_rng(100 + trial, static_cast<std::uint64_t>(snr));
            acc += nmse(H_dl, estimate_downlink(ul, truth, snr, rng, cfg).H_dl);
        }
        acc /= 20;
        if (prev >= 0.0) CHECK(acc < prev);
        prev = acc;
    }
}
