// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "bsq/downlink.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace bsq {

namespace {
constexpr double kPi = 3.14159265358979323846;

void append_le_double(std::string& out, double v) {
    static_assert(sizeof(double) == 8);
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double read_le_double(const std::string& in, std::size_t off) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[off + b])) << (8 * b);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}
}  // namespace

PathSet reciprocal_params(const PathSet& uplink_paths, const SystemConfig& cfg,
                          const DownlinkOptions& opts) {
    PathSet dl = uplink_paths;
    dl.beta = Eigen::VectorXcd::Zero(dl.size());
    if (!opts.rescale_normalized_angle) return dl;
    for (int p = 0; p < dl.size(); ++p) {
        // The physical angle is carrier-invariant; the normalized angle is
        // 2*pi*(d/lambda)*sin(theta) and d is fixed in meters, so it scales
        // with the carrier frequency.
        const double sin_theta = uplink_paths.phi[p] / (2.0 * kPi * cfg.d_over_lambda);
        if (std::abs(sin_theta) > 1.0 + 1e-12)
            throw std::invalid_argument("normalized angle implies |sin(theta)| > 1");
        dl.phi[p] = uplink_paths.phi[p] * cfg.fc_dl / cfg.fc_ul;
    }
    return dl;
}

Eigen::MatrixXcd beamforming_matrix(const PathSet& paths_dl, const SystemConfig& cfg,
                                    const std::vector<int>& subcarriers) {
    const int P = paths_dl.size();
    const int T = static_cast<int>(subcarriers.size());
    Eigen::MatrixXcd F(cfg.M * T, P);
    const double scale = 1.0 / (static_cast<double>(cfg.M) * T);
    for (int p = 0; p < P; ++p) {
        const Eigen::MatrixXcd Xi =
            path_signature(paths_dl.phi[p], paths_dl.tau[p], cfg, subcarriers, Carrier::Downlink);
        F.col(p) = scale * Eigen::Map<const Eigen::VectorXcd>(Xi.data(), Xi.size());
    }
    return F;
}

Eigen::MatrixXcd downlink_pilots(int P, int T) {
    if (P < 1) throw std::invalid_argument("path count must be >= 1");
    if (P > T) throw std::invalid_argument("not enough pilot slots to orthogonalize paths");
    Eigen::MatrixXcd S(P, T);
    const double scale = 1.0 / std::sqrt(static_cast<double>(T));
    for (int p = 0; p < P; ++p)
        for (int q = 0; q < T; ++q)
            S(p, q) = scale * std::polar(1.0, -2.0 * kPi * p * q / T);
    return S;
}

Eigen::VectorXcd observe_downlink(const PathSet& true_dl_paths, const Eigen::MatrixXcd& F,
                                  const Eigen::MatrixXcd& S_dl, const std::vector<int>& subcarriers,
                                  double snr_db, std::mt19937_64& rng, const SystemConfig& cfg) {
    const int T = static_cast<int>(subcarriers.size());
    if (F.rows() != cfg.M * T) throw std::invalid_argument("beamformer size mismatch");
    if (S_dl.cols() != T) throw std::invalid_argument("pilot width mismatch");
    if (S_dl.rows() != F.cols()) throw std::invalid_argument("pilot/beam count mismatch");

    const Eigen::MatrixXcd H = channel_matrix(true_dl_paths, cfg, Carrier::Downlink);
    Eigen::MatrixXcd Hn(cfg.M, T);
    for (int q = 0; q < T; ++q) Hn.col(q) = H.col(subcarriers[q]);
    const Eigen::VectorXcd h = Eigen::Map<const Eigen::VectorXcd>(Hn.data(), Hn.size());

    // y (row) = h^H F S + e, returned as a column of the row's entries.
    Eigen::VectorXcd y = ((h.adjoint() * F) * S_dl).transpose();
    if (!std::isinf(snr_db)) {
        const double sigma2 = std::pow(10.0, -snr_db / 10.0);
        for (int q = 0; q < T; ++q) y[q] += draw_cn(rng, sigma2);
    }
    return y;
}

Eigen::VectorXcd estimate_downlink_gains(const Eigen::VectorXcd& y_dl, const Eigen::MatrixXcd& S_dl) {
    if (y_dl.size() != S_dl.cols()) throw std::invalid_argument("observation/pilot size mismatch");
    // beta^H = y * pinv(S), pinv(S) = S^H (S S^H)^{-1}; with orthonormal rows
    // the bracket is the identity but we solve it anyway for robustness.
    const Eigen::MatrixXcd gram = S_dl * S_dl.adjoint();
    const Eigen::VectorXcd rhs = S_dl * y_dl.conjugate();  // = (y * S^H)^H
    return gram.ldlt().solve(rhs);
}

DownlinkEstimate estimate_downlink(const UplinkEstimate& uplink, const PathSet& true_dl,
                                   double snr_db, std::mt19937_64& rng, const SystemConfig& cfg,
                                   const DownlinkOptions& opts) {
    DownlinkEstimate est;
    est.paths_dl = reciprocal_params(uplink.paths, cfg, opts);
    const int P = est.paths_dl.size();
    const int T = cfg.T();
    if (P > T) throw std::invalid_argument("more paths than pilot slots");

    // Pilot subcarriers for the downlink training burst: the first T indices.
    std::vector<int> sub(T);
    for (int q = 0; q < T; ++q) sub[q] = q;

    const Eigen::MatrixXcd F = beamforming_matrix(est.paths_dl, cfg, sub);
    const Eigen::MatrixXcd S = downlink_pilots(P, T);
    const Eigen::VectorXcd y = observe_downlink(true_dl, F, S, sub, snr_db, rng, cfg);
    est.beta_dl = estimate_downlink_gains(y, S);

    est.paths_dl.beta = est.beta_dl;
    est.H_dl = channel_matrix(est.paths_dl, cfg, Carrier::Downlink);
    return est;
}

std::string serialize_feedback(const Eigen::VectorXcd& beta_dl) {
    std::string out;
    out.reserve(static_cast<std::size_t>(beta_dl.size()) * 16);
    for (int p = 0; p < beta_dl.size(); ++p) {
        append_le_double(out, beta_dl[p].real());
        append_le_double(out, beta_dl[p].imag());
    }
    return out;
}

Eigen::VectorXcd parse_feedback(const std::string& payload) {
    if (payload.size() % 16 != 0)
        throw std::invalid_argument("feedback payload length is not a multiple of 16 bytes");
    const int P = static_cast<int>(payload.size() / 16);
    Eigen::VectorXcd beta(P);
    for (int p = 0; p < P; ++p)
        beta[p] = cplx(read_le_double(payload, 16 * p), read_le_double(payload, 16 * p + 8));
    return beta;
}

}  // namespace bsq
