// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "bsq/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bsq {

namespace {
constexpr double kPi = 3.14159265358979323846;

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be finite");
}

// splitmix64, used to decorrelate (master seed, stream index) pairs.
std::uint64_t splitmix64(std::uint64_t& s) {
    s += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace

void SystemConfig::validate() const {
    if (M < 1 || N < 1 || K < 1) throw std::invalid_argument("M, N, K must be positive");
    if (K > N) throw std::invalid_argument("more users than subcarriers");
    if (f0 <= 0 || fc_ul <= 0 || fc_dl <= 0) throw std::invalid_argument("frequencies must be positive");
    if (d_over_lambda <= 0) throw std::invalid_argument("antenna spacing must be positive");
    const double fs_ = fs();
    if (static_cast<double>(M) > 2.0 * N * fc_ul / fs_)
        throw std::invalid_argument("antenna count violates M <= 2*N*fc_ul/fs");
    if ((M - 1) / (2.0 * N) * fs_ / fc_ul >= 1.0)
        throw std::invalid_argument("((M-1)/(2N))*fs/fc_ul must be < 1");
    if (d_over_lambda * fs_ / fc_ul >= 1.0)
        throw std::invalid_argument("d*fs/(lambda_ul*fc_ul) must be < 1");
    if (static_cast<double>(T()) * K > N) throw std::invalid_argument("T*K must not exceed N");
}

void PathSet::validate(const SystemConfig& cfg) const {
    const int P = size();
    if (tau.size() != P || beta.size() != P) throw std::invalid_argument("PathSet field lengths differ");
    for (int p = 0; p < P; ++p) {
        if (phi[p] < -kPi || phi[p] >= kPi) throw std::invalid_argument("angle outside [-pi, pi)");
        if (tau[p] < 0 || tau[p] >= 1.0 / cfg.f0) throw std::invalid_argument("delay outside [0, 1/f0)");
    }
    for (int p = 0; p < P; ++p)
        for (int q = p + 1; q < P; ++q) {
            if (phi[p] == phi[q]) throw std::invalid_argument("duplicate angles");
            if (tau[p] == tau[q]) throw std::invalid_argument("duplicate delays");
        }
}

Eigen::VectorXcd steering_vector(double phi, double f, int M, double fc) {
    require_finite(phi, "phi");
    require_finite(f, "f");
    if (M < 1) throw std::invalid_argument("M must be >= 1");
    if (fc <= 0) throw std::invalid_argument("fc must be positive");
    Eigen::VectorXcd a(M);
    const double rate = (1.0 + f / fc) * phi;
    for (int m = 0; m < M; ++m) a[m] = std::polar(1.0, -static_cast<double>(m) * rate);
    return a;
}

Eigen::VectorXcd delay_vector(double tau, int N, double f0) {
    require_finite(tau, "tau");
    if (N < 1) throw std::invalid_argument("N must be >= 1");
    if (f0 <= 0) throw std::invalid_argument("f0 must be positive");
    Eigen::VectorXcd b(N);
    const double rate = 2.0 * kPi * f0 * tau;
    for (int n = 0; n < N; ++n) b[n] = std::polar(1.0, -static_cast<double>(n) * rate);
    return b;
}

Eigen::MatrixXcd wideband_factor_matrix(double phi, const SystemConfig& cfg, Carrier carrier) {
    require_finite(phi, "phi");
    const double fc = cfg.carrier(carrier);
    Eigen::MatrixXcd W(cfg.M, cfg.N);
    for (int m = 0; m < cfg.M; ++m)
        for (int n = 0; n < cfg.N; ++n)
            W(m, n) = std::polar(1.0, -static_cast<double>(m) * (n * cfg.f0 / fc) * phi);
    return W;
}

Eigen::MatrixXcd path_signature(double phi, double tau, const SystemConfig& cfg,
                                const std::vector<int>& subcarriers, Carrier carrier) {
    require_finite(phi, "phi");
    require_finite(tau, "tau");
    const double fc = cfg.carrier(carrier);
    Eigen::MatrixXcd Xi(cfg.M, static_cast<int>(subcarriers.size()));
    for (std::size_t q = 0; q < subcarriers.size(); ++q) {
        const int n = subcarriers[q];
        if (n < 0 || n >= cfg.N) throw std::out_of_range("subcarrier index out of range");
        const double f = n * cfg.f0;
        const double delay_phase = 2.0 * kPi * f * tau;
        const double rate = (1.0 + f / fc) * phi;
        for (int m = 0; m < cfg.M; ++m) Xi(m, q) = std::polar(1.0, -(m * rate + delay_phase));
    }
    return Xi;
}

Eigen::MatrixXcd path_signature_full(double phi, double tau, const SystemConfig& cfg, Carrier carrier) {
    std::vector<int> all(cfg.N);
    for (int n = 0; n < cfg.N; ++n) all[n] = n;
    return path_signature(phi, tau, cfg, all, carrier);
}

Eigen::MatrixXcd channel_matrix(const PathSet& paths, const SystemConfig& cfg, Carrier carrier) {
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(cfg.M, cfg.N);
    for (int p = 0; p < paths.size(); ++p)
        H += paths.beta[p] * path_signature_full(paths.phi[p], paths.tau[p], cfg, carrier);
    return H;
}

PathSet draw_paths(std::mt19937_64& rng, int P, const SystemConfig& cfg, const PathDrawOptions& opts) {
    if (P < 1) throw std::invalid_argument("P must be >= 1");
    const double tau_max = 1.0 / (cfg.N * cfg.f0);
    const double angle_gap = opts.min_angle_gap >= 0 ? opts.min_angle_gap : 2.0 * kPi / (4.0 * cfg.M);
    const double delay_gap = opts.min_delay_gap >= 0 ? opts.min_delay_gap : tau_max / 32.0;
    std::uniform_real_distribution<double> u_phi(-kPi, kPi);
    std::uniform_real_distribution<double> u_tau(0.0, tau_max);
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));

    PathSet ps;
    ps.phi.resize(P);
    ps.tau.resize(P);
    ps.beta.resize(P);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        for (int p = 0; p < P; ++p) {
            ps.phi[p] = u_phi(rng);
            ps.tau[p] = u_tau(rng);
        }
        bool ok = true;
        for (int p = 0; p < P && ok; ++p)
            for (int q = p + 1; q < P && ok; ++q) {
                const double dphi = std::abs(ps.phi[p] - ps.phi[q]);
                const double wrapped = std::min(dphi, 2.0 * kPi - dphi);
                if (ps.phi[p] == ps.phi[q] || ps.tau[p] == ps.tau[q]) ok = false;
                if (opts.guard && (wrapped < angle_gap || std::abs(ps.tau[p] - ps.tau[q]) < delay_gap))
                    ok = false;
            }
        if (!ok) continue;
        for (int p = 0; p < P; ++p) ps.beta[p] = cplx(gauss(rng), gauss(rng));
        return ps;
    }
    throw std::runtime_error("draw_paths: separation guard rejected too many draws");
}

Eigen::VectorXcd zadoff_chu(int T, int root) {
    if (T < 1) throw std::invalid_argument("sequence length must be >= 1");
    Eigen::VectorXcd s(T);
    for (int q = 0; q < T; ++q) {
        const double num = (T % 2 == 0) ? static_cast<double>(q) * q
                                        : static_cast<double>(q) * (q + 1);
        s[q] = std::polar(1.0, -kPi * root * num / T);
    }
    return s;
}

PilotAllocation allocate_pilots(const SystemConfig& cfg, int zc_root, bool contiguous) {
    if (cfg.K > cfg.N) throw std::invalid_argument("more users than subcarriers");
    const int T = cfg.T();
    PilotAllocation alloc;
    alloc.sets.resize(cfg.K);
    alloc.pilots.resize(cfg.K);
    for (int k = 0; k < cfg.K; ++k) {
        alloc.sets[k].resize(T);
        for (int q = 0; q < T; ++q) alloc.sets[k][q] = contiguous ? k * T + q : k + q * cfg.K;
        alloc.pilots[k] = zadoff_chu(T, zc_root);
    }
    return alloc;
}

cplx draw_cn(std::mt19937_64& rng, double var) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(var / 2.0));
    const double re = gauss(rng);
    const double im = gauss(rng);
    return cplx(re, im);
}

Observation observe_uplink(const Eigen::MatrixXcd& H, const PilotAllocation& alloc, int k,
                           double snr_db, std::mt19937_64& rng) {
    if (k < 0 || k >= static_cast<int>(alloc.sets.size())) throw std::out_of_range("user index");
    if (std::isnan(snr_db)) throw std::invalid_argument("snr_db must not be NaN");
    const auto& idx = alloc.sets[k];
    const auto& s = alloc.pilots[k];
    const int T = static_cast<int>(idx.size());

    Observation obs;
    obs.subcarriers = idx;
    obs.pilot = s;
    obs.snr_db = snr_db;
    obs.Y.resize(H.rows(), T);
    for (int q = 0; q < T; ++q) obs.Y.col(q) = H.col(idx[q]) * s[q];
    if (!std::isinf(snr_db)) {
        const double sigma2 = std::pow(10.0, -snr_db / 10.0);
        for (int q = 0; q < T; ++q)
            for (int m = 0; m < H.rows(); ++m) obs.Y(m, q) += draw_cn(rng, sigma2);
    }
    return obs;
}

cplx signature_correlation(double phi1, double tau1, double phi2, double tau2,
                           const SystemConfig& cfg, Carrier carrier) {
    const double fc = cfg.carrier(carrier);
    cplx acc(0.0, 0.0);
    // Column-wise: the m-sum is a geometric series at rate d_rate(n).
    for (int n = 0; n < cfg.N; ++n) {
        const double f = n * cfg.f0;
        const double d_rate = (1.0 + f / fc) * (phi1 - phi2);
        cplx msum;
        if (std::abs(std::remainder(d_rate, 2.0 * kPi)) < 1e-15) {
            msum = cplx(static_cast<double>(cfg.M), 0.0);
        } else {
            const cplx r = std::polar(1.0, d_rate);
            msum = (1.0 - std::pow(r, cfg.M)) / (1.0 - r);
        }
        acc += msum * std::polar(1.0, 2.0 * kPi * f * (tau1 - tau2));
    }
    return acc / static_cast<double>(cfg.M * cfg.N);
}

std::mt19937_64 make_rng(std::uint64_t master_seed, std::uint64_t stream) {
    std::uint64_t s = master_seed ^ (0xd1b54a32d192ed03ULL * (stream + 1));
    const std::uint64_t a = splitmix64(s);
    const std::uint64_t b = splitmix64(s);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace bsq
