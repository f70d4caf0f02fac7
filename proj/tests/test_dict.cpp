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

#include "bsq/dict.hpp"

using namespace bsq;

namespace {
constexpr double kPi = 3.14159265358979323846;

SystemConfig small_config() {
    SystemConfig cfg;
    cfg.M = 8;
    cfg.N = 32;
    cfg.K = 8;
    cfg.f0 = 1e9 / 32;
    cfg.fc_ul = 60e9;
    cfg.fc_dl = 61e9;
    return cfg;
}

std::vector<int> comb(const SystemConfig& cfg, int k = 0) {
    std::vector<int> sub(cfg.T());
    for (int q = 0; q < cfg.T(); ++q) sub[q] = k + q * cfg.K;
    return sub;
}
}  // namespace

TEST_CASE("DOA atom has the slot-diagonal squinted-steering structure") {
    const SystemConfig cfg = small_config();
    const auto sub = comb(cfg, 3);
    DoaDictionaryFamily fam(cfg, sub);
    const int T = fam.block_dim();
    const double phi = 0.912;
    const Eigen::MatrixXcd D = fam.atom(phi);
    REQUIRE(D.rows() == cfg.M * T);
    REQUIRE(D.cols() == T);
    for (int m = 0; m < cfg.M; ++m)
        for (int q = 0; q < T; ++q)
            for (int c = 0; c < T; ++c) {
                const cplx got = D(m * T + q, c);
                if (c != q) {
                    CHECK(got == cplx(0.0, 0.0));
                } else {
                    const double rate = (1.0 + sub[q] * cfg.f0 / cfg.fc_ul) * phi;
                    CHECK(std::abs(got - std::exp(cplx(0.0, -m * rate))) < 1e-14);
                }
            }
}

TEST_CASE("DOA atom synthesizes a path observation") {
    // With block coefficients beta * delay phase per slot, atom * x must equal
    // the row-stacked restricted path signature.
    const SystemConfig cfg = small_config();
    const auto sub = comb(cfg, 1);
    DoaDictionaryFamily fam(cfg, sub);
    const int T = fam.block_dim();
    const double phi = -2.2, tau = 4.2e-10;
    const cplx beta(0.7, -1.1);
    Eigen::VectorXcd x(T);
    for (int q = 0; q < T; ++q)
        x[q] = beta * std::exp(cplx(0.0, -2.0 * kPi * sub[q] * cfg.f0 * tau));
    const Eigen::VectorXcd v = fam.atom(phi) * x;
    const Eigen::MatrixXcd Xi = path_signature(phi, tau, cfg, sub);
    for (int m = 0; m < cfg.M; ++m)
        for (int q = 0; q < T; ++q) CHECK(std::abs(v[m * T + q] - beta * Xi(m, q)) < 1e-12);
}

TEST_CASE("delay atom is kernel kron identity") {
    const SystemConfig cfg = small_config();
    const auto sub = comb(cfg, 2);
    DelayDictionaryFamily fam(cfg, sub);
    const int T = static_cast<int>(sub.size());
    const double tau = 6.1e-10;
    const Eigen::MatrixXcd D = fam.atom(tau);
    const Eigen::VectorXcd k = fam.kernel(tau);
    REQUIRE(D.rows() == cfg.M * T);
    REQUIRE(D.cols() == cfg.M);
    for (int q = 0; q < T; ++q)
        for (int m = 0; m < cfg.M; ++m)
            for (int c = 0; c < cfg.M; ++c)
                CHECK(D(q * cfg.M + m, c) == (c == m ? k[q] : cplx(0.0, 0.0)));
    for (int q = 0; q < T; ++q)
        CHECK(std::abs(k[q] - std::exp(cplx(0.0, -2.0 * kPi * sub[q] * cfg.f0 * tau))) < 1e-14);
}

TEST_CASE("atom derivatives match central finite differences") {
    const SystemConfig cfg = small_config();
    const auto sub = comb(cfg);
    DoaDictionaryFamily doa(cfg, sub);
    DelayDictionaryFamily del(cfg, sub);
    const double h_phi = 1e-6;
    for (double phi : {-2.5, -0.3, 0.9, 2.9}) {
        const Eigen::MatrixXcd num = (doa.atom(phi + h_phi) - doa.atom(phi - h_phi)) / (2 * h_phi);
        const Eigen::MatrixXcd ana = doa.atom_derivative(phi);
        CHECK((num - ana).norm() < 1e-6 * std::max(1.0, ana.norm()));
    }
    const double h_tau = 1e-16;
    for (double tau : {1e-10, 4e-10, 9e-10}) {
        const Eigen::MatrixXcd num = (del.atom(tau + h_tau) - del.atom(tau - h_tau)) / (2 * h_tau);
        const Eigen::MatrixXcd ana = del.atom_derivative(tau);
        CHECK((num - ana).norm() < 1e-5 * std::max(1.0, ana.norm()));
    }
}

TEST_CASE("initial grids are uniform and in-domain") {
    const SystemConfig cfg = small_config();
    const auto sub = comb(cfg);
    DoaDictionaryFamily doa(cfg, sub);
    DelayDictionaryFamily del(cfg, sub);
    const int L = 16;
    const auto gphi = doa.initial_grid(L);
    const auto gtau = del.initial_grid(L);
    REQUIRE(static_cast<int>(gphi.size()) == L);
    REQUIRE(static_cast<int>(gtau.size()) == L);
    for (double p : gphi) {
        CHECK(p >= -kPi);
        CHECK(p < kPi);
    }
    const double tau_max = 1.0 / (cfg.N * cfg.f0);
    for (double t : gtau) {
        CHECK(t > 0.0);
        CHECK(t <= tau_max + 1e-18);
    }
    for (std::size_t i = 1; i + 1 < gtau.size(); ++i)
        CHECK(gtau[i + 1] - gtau[i] == doctest::Approx(gtau[1] - gtau[0]));
    CHECK(doa.grid_scale(L) == doctest::Approx(2.0 * kPi / L));
    CHECK(del.grid_scale(L) == doctest::Approx(tau_max / L));
}

TEST_CASE("canonicalization and distances") {
    const SystemConfig cfg = small_config();
    const auto sub = comb(cfg);
    DoaDictionaryFamily doa(cfg, sub);
    DelayDictionaryFamily del(cfg, sub);
    CHECK(doa.canonicalize(kPi) == doctest::Approx(-kPi));
    CHECK(doa.canonicalize(2.5 * kPi) == doctest::Approx(0.5 * kPi));
    CHECK(doa.canonicalize(-1.2) == doctest::Approx(-1.2));
    CHECK(doa.distance(-3.1, 3.1) == doctest::Approx(2 * kPi - 6.2));
    CHECK(del.canonicalize(-1e-12) == 0.0);
    CHECK(del.canonicalize(2.0 / cfg.f0) < 1.0 / cfg.f0);
    CHECK(del.distance(1e-10, 4e-10) == doctest::Approx(3e-10));
}

TEST_CASE("the narrowband factor is 2pi-periodic; the squinted atom is not") {
    const SystemConfig cfg = small_config();
    const auto sub = comb(cfg);
    DoaDictionaryFamily nb(cfg, sub, /*bse=*/false);
    DoaDictionaryFamily wb(cfg, sub, /*bse=*/true);
    const double phi = 0.77;
    CHECK((nb.atom(phi) - nb.atom(phi + 2 * kPi)).norm() < 1e-9);
    CHECK((wb.atom(phi) - wb.atom(phi + 2 * kPi)).norm() > 1e-3);
}

TEST_CASE("rotation matrix ties the squinted column to the carrier steering entry") {
    const SystemConfig cfg = small_config();
    const auto sub = comb(cfg);
    const double phi = 1.4;
    DoaDictionaryFamily fam(cfg, sub);
    const Eigen::MatrixXcd P = fam.profile(phi);
    for (int m = 0; m < cfg.M; ++m) {
        const Eigen::MatrixXcd Phi_m = rotation_matrix(phi, m, sub, cfg);
        // P(m, q) = exp(-j m phi) * Phi_m(q, q)
        for (int q = 0; q < static_cast<int>(sub.size()); ++q) {
            const cplx expect = std::exp(cplx(0.0, -m * phi)) * Phi_m(q, q);
            CHECK(std::abs(P(m, q) - expect) < 1e-13);
        }
    }
}

TEST_CASE("materialized dictionaries stack atoms in grid order") {
    const SystemConfig cfg = small_config();
    const auto sub = comb(cfg);
    DoaDictionaryFamily doa(cfg, sub);
    const std::vector<double> grid{-1.0, 0.25, 2.0};
    const Eigen::MatrixXcd D = doa_dictionary(grid, sub, cfg);
    REQUIRE(D.cols() == 3 * doa.block_dim());
    for (int i = 0; i < 3; ++i)
        CHECK((D.middleCols(i * doa.block_dim(), doa.block_dim()) - doa.atom(grid[i])).norm() ==
              0.0);
    const Eigen::MatrixXcd Dt = delay_dictionary({1e-10, 5e-10}, sub, cfg);
    CHECK(Dt.cols() == 2 * cfg.M);
}
