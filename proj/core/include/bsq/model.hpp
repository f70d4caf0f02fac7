// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef BSQ_MODEL_HPP
#define BSQ_MODEL_HPP

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace bsq {

using cplx = std::complex<double>;

/// Which carrier a steering/signature computation refers to.
enum class Carrier { Uplink, Downlink };

/// Array/OFDM/carrier geometry. All frequencies in Hz.
///
/// M antennas (ULA, spacing d = d_over_lambda * lambda_ul), N subcarriers with
/// spacing f0, K users sharing the N subcarriers, T = floor(N/K) pilots per user.
struct SystemConfig {
    int M = 64;
    int N = 64;
    int K = 8;
    double f0 = 1e9 / 64;   // subcarrier spacing
    double fc_ul = 60e9;    // uplink carrier
    double fc_dl = 61e9;    // downlink carrier
    double d_over_lambda = 0.5;

    int T() const { return N / K; }
    double fs() const { return N * f0; }
    double carrier(Carrier c) const { return c == Carrier::Uplink ? fc_ul : fc_dl; }

    /// Throws std::invalid_argument if the geometry violates the model
    /// assumptions (M <= 2*N*fc_ul/fs and the two orthogonality conditions).
    void validate() const;
};

/// One user's multipath channel: P triples (normalized DOA, delay, complex gain).
struct PathSet {
    Eigen::VectorXd phi;    // normalized DOA, radians, each in [-pi, pi)
    Eigen::VectorXd tau;    // delay, seconds, each in [0, 1/f0)
    Eigen::VectorXcd beta;  // complex gain

    int size() const { return static_cast<int>(phi.size()); }
    void validate(const SystemConfig& cfg) const;
};

/// Options for random path generation. The separation guard rejects draws in
/// which two angles (or two delays) are closer than the given gaps; near
/// collisions are unresolvable by any estimator and break the pairing step.
struct PathDrawOptions {
    bool guard = true;
    double min_angle_gap = -1.0;  // <0: default 2*pi/(4*M)
    double min_delay_gap = -1.0;  // <0: default (1/(N*f0))/32
};

/// Comb pilot allocation: user k owns subcarriers {k, k+K, k+2K, ...} and a
/// unit-modulus Zadoff-Chu pilot per owned subcarrier.
struct PilotAllocation {
    std::vector<std::vector<int>> sets;      // K lists, each of length T
    std::vector<Eigen::VectorXcd> pilots;    // K pilot vectors of length T
};

/// Received uplink pilots of one user: Y = H[:, N_k] * diag(s_k) + E.
struct Observation {
    Eigen::MatrixXcd Y;            // M x T
    std::vector<int> subcarriers;  // the T indices N_k
    Eigen::VectorXcd pilot;        // s_k, length T
    double snr_db = 0.0;
    std::uint64_t seed = 0;
};

/// Wideband steering vector, entry m = exp(-j*m*(1 + f/fc)*phi), m = 0..M-1.
Eigen::VectorXcd steering_vector(double phi, double f, int M, double fc);

/// Delay phase vector, entry n = exp(-j*2*pi*n*f0*tau), n = 0..N-1.
Eigen::VectorXcd delay_vector(double tau, int N, double f0);

/// M x N matrix of wideband factors, entry (m,n) = exp(-j*m*(n*f0/fc)*phi).
Eigen::MatrixXcd wideband_factor_matrix(double phi, const SystemConfig& cfg,
                                        Carrier carrier = Carrier::Uplink);

/// Path signature restricted to the given subcarriers: column q (subcarrier n)
/// equals steering_vector(phi, n*f0) * exp(-j*2*pi*n*f0*tau).
Eigen::MatrixXcd path_signature(double phi, double tau, const SystemConfig& cfg,
                                const std::vector<int>& subcarriers,
                                Carrier carrier = Carrier::Uplink);

/// Full M x N signature over all subcarriers.
Eigen::MatrixXcd path_signature_full(double phi, double tau, const SystemConfig& cfg,
                                     Carrier carrier = Carrier::Uplink);

/// M x N channel matrix: sum over paths of beta_p * signature(phi_p, tau_p).
Eigen::MatrixXcd channel_matrix(const PathSet& paths, const SystemConfig& cfg,
                                Carrier carrier = Carrier::Uplink);

/// Draws P paths: beta ~ CN(0,1), phi ~ U[-pi,pi), tau ~ U[0, 1/(N*f0)),
/// rejection-resampled under the separation guard.
PathSet draw_paths(std::mt19937_64& rng, int P, const SystemConfig& cfg,
                   const PathDrawOptions& opts = {});

/// Interleaved-comb pilot allocation with Zadoff-Chu pilots of the given root.
/// With contiguous=true user k instead gets the block {k*T, ..., k*T+T-1}.
PilotAllocation allocate_pilots(const SystemConfig& cfg, int zc_root = 1,
                                bool contiguous = false);

/// Zadoff-Chu sequence of length T (unit modulus entries).
Eigen::VectorXcd zadoff_chu(int T, int root);

/// Noisy uplink observation of user k. snr_db = +inf gives the noiseless Y.
/// Noise variance is sigma_n^2 = 1/SNR (unit pilot power).
Observation observe_uplink(const Eigen::MatrixXcd& H, const PilotAllocation& alloc,
                           int k, double snr_db, std::mt19937_64& rng);

/// Normalized signature inner product (1/(M*N)) <vec Xi_1, vec Xi_2>; equals 1
/// exactly for identical parameters and vanishes asymptotically otherwise.
cplx signature_correlation(double phi1, double tau1, double phi2, double tau2,
                           const SystemConfig& cfg, Carrier carrier = Carrier::Uplink);

/// Deterministic per-trial RNG stream derived from (master seed, stream index).
std::mt19937_64 make_rng(std::uint64_t master_seed, std::uint64_t stream);

/// Circular complex Gaussian with total variance `var` (real/imag var/2 each).
cplx draw_cn(std::mt19937_64& rng, double var);

}  // namespace bsq

#endif  // BSQ_MODEL_HPP
