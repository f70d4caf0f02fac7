// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "bsq/dict.hpp"

#include <cmath>
#include <stdexcept>

namespace bsq {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

// ---------------------------------------------------------------------------
// DOA family
// ---------------------------------------------------------------------------

DoaDictionaryFamily::DoaDictionaryFamily(const SystemConfig& cfg, std::vector<int> subcarriers,
                                         bool bse, Carrier carrier)
    : cfg_(cfg), sub_(std::move(subcarriers)), bse_(bse), carrier_(carrier) {
    if (sub_.empty()) throw std::invalid_argument("subcarrier list is empty");
    for (int n : sub_)
        if (n < 0 || n >= cfg_.N) throw std::out_of_range("subcarrier index out of range");
}

Eigen::MatrixXcd DoaDictionaryFamily::profile(double phi) const {
    const int T = static_cast<int>(sub_.size());
    const double fc = cfg_.carrier(carrier_);
    Eigen::MatrixXcd A(cfg_.M, T);
    for (int q = 0; q < T; ++q) {
        const double rate = bse_ ? (1.0 + sub_[q] * cfg_.f0 / fc) * phi : phi;
        for (int m = 0; m < cfg_.M; ++m) A(m, q) = std::polar(1.0, -m * rate);
    }
    return A;
}

Eigen::MatrixXcd DoaDictionaryFamily::profile_derivative(double phi) const {
    const int T = static_cast<int>(sub_.size());
    const double fc = cfg_.carrier(carrier_);
    Eigen::MatrixXcd A(cfg_.M, T);
    for (int q = 0; q < T; ++q) {
        const double c = bse_ ? (1.0 + sub_[q] * cfg_.f0 / fc) : 1.0;
        for (int m = 0; m < cfg_.M; ++m)
            A(m, q) = cplx(0.0, -m * c) * std::polar(1.0, -m * c * phi);
    }
    return A;
}

Eigen::MatrixXcd DoaDictionaryFamily::atom(double phi) const {
    const int T = static_cast<int>(sub_.size());
    const Eigen::MatrixXcd A = profile(phi);
    Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(cfg_.M * T, T);
    for (int m = 0; m < cfg_.M; ++m)
        for (int q = 0; q < T; ++q) D(m * T + q, q) = A(m, q);
    return D;
}

Eigen::MatrixXcd DoaDictionaryFamily::atom_derivative(double phi) const {
    const int T = static_cast<int>(sub_.size());
    const Eigen::MatrixXcd A = profile_derivative(phi);
    Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(cfg_.M * T, T);
    for (int m = 0; m < cfg_.M; ++m)
        for (int q = 0; q < T; ++q) D(m * T + q, q) = A(m, q);
    return D;
}

std::vector<double> DoaDictionaryFamily::initial_grid(int L) const {
    if (L < 1) throw std::invalid_argument("grid size must be >= 1");
    std::vector<double> grid(L);
    for (int i = 1; i <= L; ++i) grid[i - 1] = canonicalize(-kPi + 2.0 * kPi * i / L);
    return grid;
}

double DoaDictionaryFamily::canonicalize(double phi) const {
    double w = std::remainder(phi, 2.0 * kPi);
    if (w >= kPi) w -= 2.0 * kPi;
    return w;
}

double DoaDictionaryFamily::distance(double a, double b) const {
    const double d = std::abs(std::remainder(a - b, 2.0 * kPi));
    return d;
}

double DoaDictionaryFamily::grid_scale(int L) const { return 2.0 * kPi / L; }

// ---------------------------------------------------------------------------
// Delay family
// ---------------------------------------------------------------------------

DelayDictionaryFamily::DelayDictionaryFamily(const SystemConfig& cfg, std::vector<int> subcarriers)
    : cfg_(cfg), sub_(std::move(subcarriers)) {
    if (sub_.empty()) throw std::invalid_argument("subcarrier list is empty");
    for (int n : sub_)
        if (n < 0 || n >= cfg_.N) throw std::out_of_range("subcarrier index out of range");
}

Eigen::VectorXcd DelayDictionaryFamily::kernel(double tau) const {
    const int T = static_cast<int>(sub_.size());
    Eigen::VectorXcd b(T);
    for (int q = 0; q < T; ++q) b[q] = std::polar(1.0, -2.0 * kPi * sub_[q] * cfg_.f0 * tau);
    return b;
}

Eigen::VectorXcd DelayDictionaryFamily::kernel_derivative(double tau) const {
    const int T = static_cast<int>(sub_.size());
    Eigen::VectorXcd b(T);
    for (int q = 0; q < T; ++q) {
        const double w = 2.0 * kPi * sub_[q] * cfg_.f0;
        b[q] = cplx(0.0, -w) * std::polar(1.0, -w * tau);
    }
    return b;
}

Eigen::MatrixXcd DelayDictionaryFamily::atom(double tau) const {
    const int T = static_cast<int>(sub_.size());
    const Eigen::VectorXcd b = kernel(tau);
    Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(cfg_.M * T, cfg_.M);
    for (int q = 0; q < T; ++q)
        for (int m = 0; m < cfg_.M; ++m) D(q * cfg_.M + m, m) = b[q];
    return D;
}

Eigen::MatrixXcd DelayDictionaryFamily::atom_derivative(double tau) const {
    const int T = static_cast<int>(sub_.size());
    const Eigen::VectorXcd b = kernel_derivative(tau);
    Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(cfg_.M * T, cfg_.M);
    for (int q = 0; q < T; ++q)
        for (int m = 0; m < cfg_.M; ++m) D(q * cfg_.M + m, m) = b[q];
    return D;
}

std::vector<double> DelayDictionaryFamily::initial_grid(int L) const {
    if (L < 1) throw std::invalid_argument("grid size must be >= 1");
    std::vector<double> grid(L);
    for (int i = 1; i <= L; ++i) grid[i - 1] = static_cast<double>(i) / (L * cfg_.N * cfg_.f0);
    return grid;
}

double DelayDictionaryFamily::canonicalize(double tau) const {
    const double hi = 1.0 / cfg_.f0;
    if (tau < 0.0) return 0.0;
    if (tau >= hi) return std::nextafter(hi, 0.0);
    return tau;
}

double DelayDictionaryFamily::grid_scale(int L) const { return 1.0 / (L * cfg_.N * cfg_.f0); }

// ---------------------------------------------------------------------------
// Free functions
// ---------------------------------------------------------------------------

Eigen::MatrixXcd rotation_matrix(double phi, int m, const std::vector<int>& subcarriers,
                                 const SystemConfig& cfg) {
    if (m < 0 || m >= cfg.M) throw std::out_of_range("antenna index out of range");
    const int T = static_cast<int>(subcarriers.size());
    Eigen::MatrixXcd Phi = Eigen::MatrixXcd::Zero(T, T);
    for (int q = 0; q < T; ++q)
        Phi(q, q) = std::polar(1.0, -m * (subcarriers[q] * cfg.f0 / cfg.fc_ul) * phi);
    return Phi;
}

Eigen::MatrixXcd doa_atom(double phi, const std::vector<int>& subcarriers, const SystemConfig& cfg) {
    return DoaDictionaryFamily(cfg, subcarriers).atom(phi);
}

Eigen::MatrixXcd materialize(const DictionaryFamily& family, const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("grid is empty");
    const int B = family.block_dim();
    Eigen::MatrixXcd D(family.measurement_dim(), static_cast<int>(grid.size()) * B);
    for (std::size_t i = 0; i < grid.size(); ++i)
        D.middleCols(static_cast<int>(i) * B, B) = family.atom(grid[i]);
    return D;
}

Eigen::MatrixXcd doa_dictionary(const std::vector<double>& grid, const std::vector<int>& subcarriers,
                                const SystemConfig& cfg) {
    return materialize(DoaDictionaryFamily(cfg, subcarriers), grid);
}

Eigen::MatrixXcd delay_dictionary(const std::vector<double>& grid, const std::vector<int>& subcarriers,
                                  const SystemConfig& cfg) {
    return materialize(DelayDictionaryFamily(cfg, subcarriers), grid);
}

}  // namespace bsq
