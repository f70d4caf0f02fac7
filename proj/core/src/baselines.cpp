// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "bsq/baselines.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <stdexcept>

namespace bsq {

namespace {
constexpr double kPi = 3.14159265358979323846;

Eigen::VectorXcd doa_measurement(const Observation& obs) {
    const int M = static_cast<int>(obs.Y.rows());
    const int T = static_cast<int>(obs.Y.cols());
    Eigen::VectorXcd y(M * T);
    for (int m = 0; m < M; ++m)
        for (int q = 0; q < T; ++q) y[m * T + q] = obs.Y(m, q);
    return y;
}

Eigen::MatrixXcd compensated(const Observation& obs) {
    Eigen::MatrixXcd Yc = obs.Y;
    for (int q = 0; q < Yc.cols(); ++q) Yc.col(q) /= obs.pilot[q];
    return Yc;
}

double pick_noise_var(const BaselineOptions& opts, const Eigen::MatrixXcd& Y) {
    return opts.noise_var > 0 ? opts.noise_var : estimate_noise_variance(Y);
}

DoaEstimate sorted_doa(std::vector<double> phi, Eigen::MatrixXcd coeffs, int iterations) {
    DoaEstimate est;
    const int P = static_cast<int>(phi.size());
    std::vector<int> order(P);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return phi[a] < phi[b]; });
    est.phi.resize(P);
    est.coeffs.resize(coeffs.rows(), P);
    for (int p = 0; p < P; ++p) {
        est.phi[p] = phi[order[p]];
        est.coeffs.col(p) = coeffs.col(order[p]);
    }
    est.irls.iterations = iterations;
    est.irls.params = est.phi;
    return est;
}

// Narrowband (squint-ignoring) path signature on the pilot subcarriers: the
// steering vector is evaluated at the carrier only.
Eigen::MatrixXcd narrowband_signature(double phi, double tau, const SystemConfig& cfg,
                                      const std::vector<int>& subcarriers) {
    const int T = static_cast<int>(subcarriers.size());
    Eigen::MatrixXcd Xi(cfg.M, T);
    for (int q = 0; q < T; ++q) {
        const double f = subcarriers[q] * cfg.f0;
        const double delay_phase = 2.0 * kPi * f * tau;
        for (int m = 0; m < cfg.M; ++m) Xi(m, q) = std::polar(1.0, -(m * phi + delay_phase));
    }
    return Xi;
}

Eigen::MatrixXcd narrowband_channel(const PathSet& paths, const SystemConfig& cfg) {
    std::vector<int> all(cfg.N);
    for (int n = 0; n < cfg.N; ++n) all[n] = n;
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(cfg.M, cfg.N);
    for (int p = 0; p < paths.size(); ++p)
        H += paths.beta[p] * narrowband_signature(paths.phi[p], paths.tau[p], cfg, all);
    return H;
}

// Pairing / gain LS against an arbitrary per-path signature model.
using SignatureFn =
    std::function<Eigen::MatrixXcd(double phi, double tau)>;  // M x T restricted signature

Eigen::VectorXcd sig_vec(const SignatureFn& sig, double phi, double tau) {
    const Eigen::MatrixXcd Xi = sig(phi, tau);
    return Eigen::Map<const Eigen::VectorXcd>(Xi.data(), Xi.size());
}

PairList pair_with_model(const std::vector<double>& phi, const std::vector<double>& tau,
                         const Eigen::VectorXcd& z, const SignatureFn& sig) {
    const int P = static_cast<int>(phi.size());
    const int Q = static_cast<int>(tau.size());
    if (P == 0 || Q == 0) return {};
    Eigen::MatrixXd C(P, Q);
    for (int i = 0; i < P; ++i)
        for (int j = 0; j < Q; ++j) C(i, j) = std::abs(sig_vec(sig, phi[i], tau[j]).dot(z));
    PairList out;
    std::vector<bool> ui(P, false), uj(Q, false);
    for (int k = 0; k < std::min(P, Q); ++k) {
        double best = -1.0;
        int bi = -1, bj = -1;
        for (int i = 0; i < P; ++i) {
            if (ui[i]) continue;
            for (int j = 0; j < Q; ++j)
                if (!uj[j] && C(i, j) > best) {
                    best = C(i, j);
                    bi = i;
                    bj = j;
                }
        }
        ui[bi] = uj[bj] = true;
        out.emplace_back(bi, bj);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Single-subcarrier steering dictionary (scalar blocks) for the no-MMV run.
class SingleToneDoaFamily final : public DictionaryFamily {
  public:
    SingleToneDoaFamily(const SystemConfig& cfg, int subcarrier) : cfg_(cfg), n_(subcarrier) {}

    int measurement_dim() const override { return cfg_.M; }
    int block_dim() const override { return 1; }

    Eigen::MatrixXcd atom(double phi) const override {
        return steering_vector(phi, n_ * cfg_.f0, cfg_.M, cfg_.fc_ul);
    }
    Eigen::MatrixXcd atom_derivative(double phi) const override {
        const double c = 1.0 + n_ * cfg_.f0 / cfg_.fc_ul;
        Eigen::VectorXcd a = steering_vector(phi, n_ * cfg_.f0, cfg_.M, cfg_.fc_ul);
        for (int m = 0; m < cfg_.M; ++m) a[m] *= cplx(0.0, -m * c);
        return a;
    }
    std::vector<double> initial_grid(int L) const override {
        std::vector<double> g(L);
        for (int i = 1; i <= L; ++i) g[i - 1] = canonicalize(-kPi + 2.0 * kPi * i / L);
        return g;
    }
    double canonicalize(double phi) const override {
        double w = std::remainder(phi, 2.0 * kPi);
        if (w >= kPi) w -= 2.0 * kPi;
        return w;
    }
    double distance(double a, double b) const override {
        return std::abs(std::remainder(a - b, 2.0 * kPi));
    }
    double merge_tolerance() const override { return 1e-4; }
    double grid_scale(int L) const override { return 2.0 * kPi / L; }

  private:
    SystemConfig cfg_;
    int n_;
};

}  // namespace

double omp_threshold(double noise_var, int measurement_dim) {
    return noise_var * measurement_dim * (1.0 + 2.0 / std::sqrt(static_cast<double>(measurement_dim)));
}

BlockOmpResult block_omp(const Eigen::MatrixXcd& D, int block_dim, const Eigen::VectorXcd& y,
                         double xi2, int max_blocks) {
    if (block_dim < 1 || D.cols() % block_dim != 0)
        throw std::invalid_argument("dictionary width is not a multiple of the block size");
    const int L = static_cast<int>(D.cols()) / block_dim;
    max_blocks = std::min(max_blocks, L);

    BlockOmpResult res;
    Eigen::VectorXcd r = y;
    res.residual2 = r.squaredNorm();
    const double floor2 = std::max(xi2, 1e-12 * y.squaredNorm());
    std::vector<bool> used(L, false);
    while (static_cast<int>(res.selected.size()) < max_blocks && res.residual2 > floor2) {
        int best = -1;
        double best_score = -1.0;
        for (int i = 0; i < L; ++i) {
            if (used[i]) continue;
            const double score = (D.middleCols(i * block_dim, block_dim).adjoint() * r).squaredNorm();
            if (score > best_score) {
                best_score = score;
                best = i;
            }
        }
        if (best < 0) break;
        used[best] = true;
        res.selected.push_back(best);

        const int s = static_cast<int>(res.selected.size());
        Eigen::MatrixXcd A(D.rows(), s * block_dim);
        for (int k = 0; k < s; ++k)
            A.middleCols(k * block_dim, block_dim) =
                D.middleCols(res.selected[k] * block_dim, block_dim);
        const Eigen::VectorXcd x = A.colPivHouseholderQr().solve(y);
        r = y - A * x;
        const double r2 = r.squaredNorm();
        res.coeffs.resize(block_dim, s);
        for (int k = 0; k < s; ++k) res.coeffs.col(k) = x.segment(k * block_dim, block_dim);
        res.residual2 = r2;
    }
    return res;
}

DoaEstimate ongrid_block_omp(const Observation& obs, const SystemConfig& cfg,
                             const BaselineOptions& opts) {
    DoaDictionaryFamily family(cfg, obs.subcarriers);
    const std::vector<double> grid = family.initial_grid(opts.grid_size);
    const Eigen::MatrixXcd D = materialize(family, grid);
    const Eigen::VectorXcd y = doa_measurement(obs);
    const double nv = pick_noise_var(opts, obs.Y);
    const BlockOmpResult omp =
        block_omp(D, family.block_dim(), y, omp_threshold(nv, family.measurement_dim()),
                  opts.max_paths);
    std::vector<double> phi;
    for (int idx : omp.selected) phi.push_back(grid[idx]);
    return sorted_doa(std::move(phi), omp.coeffs, static_cast<int>(omp.selected.size()));
}

DelayEstimate ongrid_delay_omp(const Observation& obs, const SystemConfig& cfg,
                               const BaselineOptions& opts) {
    DelayDictionaryFamily family(cfg, obs.subcarriers);
    const std::vector<double> grid = family.initial_grid(opts.grid_size);
    const int L = static_cast<int>(grid.size());
    const int T = static_cast<int>(obs.subcarriers.size());
    Eigen::MatrixXcd K(T, L);
    for (int i = 0; i < L; ++i) K.col(i) = family.kernel(grid[i]);

    const Eigen::MatrixXcd Yc = compensated(obs);
    const double nv = pick_noise_var(opts, Yc);
    const double xi2 = omp_threshold(nv, family.measurement_dim());
    const double floor2 = std::max(xi2, 1e-12 * Yc.squaredNorm());

    // Kronecker structure keeps the dictionary implicit: block correlation is
    // ||R conj(k_i)||^2 and the joint refit is an L x L-free small solve.
    std::vector<int> selected;
    Eigen::MatrixXcd X;  // M x s coefficients
    Eigen::MatrixXcd R = Yc;
    double res2 = R.squaredNorm();
    std::vector<bool> used(L, false);
    const int max_blocks = std::min(opts.max_paths, L);
    while (static_cast<int>(selected.size()) < max_blocks && res2 > floor2) {
        int best = -1;
        double best_score = -1.0;
        for (int i = 0; i < L; ++i) {
            if (used[i]) continue;
            const double score = (R * K.col(i).conjugate()).squaredNorm();
            if (score > best_score) {
                best_score = score;
                best = i;
            }
        }
        if (best < 0) break;
        used[best] = true;
        selected.push_back(best);
        const int s = static_cast<int>(selected.size());
        Eigen::MatrixXcd Ka(T, s);
        for (int k = 0; k < s; ++k) Ka.col(k) = K.col(selected[k]);
        // min_X || Yc - X Ka^T ||_F  =>  X = Yc conj(Ka) (Ka^T conj(Ka))^{-1}
        const Eigen::MatrixXcd G = (Ka.transpose() * Ka.conjugate());
        X = (G.ldlt().solve((Yc * Ka.conjugate()).transpose())).transpose();
        R = Yc - X * Ka.transpose();
        res2 = R.squaredNorm();
    }

    DelayEstimate est;
    const int P = static_cast<int>(selected.size());
    std::vector<int> order(P);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return grid[selected[a]] < grid[selected[b]]; });
    est.tau.resize(P);
    est.coeffs.resize(cfg.M, P);
    for (int p = 0; p < P; ++p) {
        est.tau[p] = grid[selected[order[p]]];
        est.coeffs.col(p) = X.col(order[p]);
    }
    est.irls.iterations = P;
    est.irls.params = est.tau;
    return est;
}

DoaEstimate grid_refinement(const Observation& obs, const SystemConfig& cfg,
                            const BaselineOptions& opts) {
    DoaEstimate est = ongrid_block_omp(obs, cfg, opts);
    if (opts.refinement_levels <= 0 || est.phi.empty()) return est;

    DoaDictionaryFamily family(cfg, obs.subcarriers);
    const Eigen::VectorXcd y = doa_measurement(obs);
    const int T = family.block_dim();
    const double delta = 2.0 * kPi / opts.grid_size;

    std::vector<double> phi = est.phi;
    const int P = static_cast<int>(phi.size());
    const auto residual2 = [&](const std::vector<double>& cand) {
        Eigen::MatrixXcd A(family.measurement_dim(), P * T);
        for (int p = 0; p < P; ++p) A.middleCols(p * T, T) = family.atom(cand[p]);
        const Eigen::VectorXcd x = A.colPivHouseholderQr().solve(y);
        return (y - A * x).squaredNorm();
    };

    double cur = residual2(phi);
    for (int level = 1; level <= opts.refinement_levels; ++level) {
        const double step = delta / std::pow(2.0, level);
        for (int p = 0; p < P; ++p) {
            std::vector<double> cand = phi;
            double best = cur;
            double best_phi = phi[p];
            for (int k = -2; k <= 2; ++k) {
                if (k == 0) continue;
                cand[p] = family.canonicalize(phi[p] + k * step);
                const double r2 = residual2(cand);
                if (r2 < best) {
                    best = r2;
                    best_phi = cand[p];
                }
            }
            phi[p] = best_phi;
            cur = best;
        }
    }
    return sorted_doa(std::move(phi), est.coeffs, est.irls.iterations + opts.refinement_levels);
}

DoaEstimate offgrid_no_bse(const Observation& obs, const SystemConfig& cfg,
                           const BaselineOptions& opts) {
    DoaDictionaryFamily family(cfg, obs.subcarriers, /*bse=*/false);
    const Eigen::VectorXcd y = doa_measurement(obs);
    IrlsOptions local = opts.irls;
    local.L_initial = opts.grid_size;
    if (local.noise_var <= 0) local.noise_var = pick_noise_var(opts, obs.Y);
    const IrlsResult irls = run_irls(family, y, local);
    DoaEstimate est = sorted_doa(irls.params, irls.coeffs, irls.iterations);
    est.irls = irls;
    return est;
}

DoaEstimate offgrid_no_mmv(const Observation& obs, const SystemConfig& cfg,
                           const BaselineOptions& opts) {
    const int T = static_cast<int>(obs.subcarriers.size());
    std::vector<std::vector<double>> per_slot;
    int iterations = 0;
    for (int q = 0; q < T; ++q) {
        SingleToneDoaFamily family(cfg, obs.subcarriers[q]);
        IrlsOptions local = opts.irls;
        local.L_initial = opts.grid_size;
        if (local.noise_var <= 0) local.noise_var = pick_noise_var(opts, obs.Y);
        const IrlsResult irls = run_irls(family, obs.Y.col(q), local);
        std::vector<double> phis = irls.params;
        std::sort(phis.begin(), phis.end());
        per_slot.push_back(std::move(phis));
        iterations = std::max(iterations, irls.iterations);
    }
    // Consensus path count = most frequent per-subcarrier count, then average
    // the sorted angle lists over the agreeing subcarriers.
    std::map<std::size_t, int> votes;
    for (const auto& v : per_slot) ++votes[v.size()];
    std::size_t P = 0;
    int best_vote = -1;
    for (const auto& [count, vote] : votes)
        if (vote > best_vote || (vote == best_vote && count > P)) {
            best_vote = vote;
            P = count;
        }
    std::vector<double> phi(P, 0.0);
    if (P > 0) {
        int agreeing = 0;
        for (const auto& v : per_slot) {
            if (v.size() != P) continue;
            ++agreeing;
            for (std::size_t p = 0; p < P; ++p) phi[p] += v[p];
        }
        for (double& f : phi) f /= std::max(agreeing, 1);
    }
    return sorted_doa(std::move(phi), Eigen::MatrixXcd::Zero(T, static_cast<int>(P)), iterations);
}

UplinkEstimate estimate_uplink_baseline(BaselineKind kind, const Observation& obs,
                                        const SystemConfig& cfg, const BaselineOptions& opts) {
    UplinkEstimate est;
    const bool squint_aware = (kind != BaselineKind::OffGridNoBSE);

    switch (kind) {
        case BaselineKind::OnGridBlockOMP: est.doa = ongrid_block_omp(obs, cfg, opts); break;
        case BaselineKind::GridRefinement: est.doa = grid_refinement(obs, cfg, opts); break;
        case BaselineKind::OffGridNoBSE: est.doa = offgrid_no_bse(obs, cfg, opts); break;
        case BaselineKind::OffGridNoMMV: est.doa = offgrid_no_mmv(obs, cfg, opts); break;
    }

    if (kind == BaselineKind::OnGridBlockOMP || kind == BaselineKind::GridRefinement) {
        est.delay = ongrid_delay_omp(obs, cfg, opts);
    } else {
        IrlsOptions delay_opts = opts.irls;
        delay_opts.L_initial = opts.grid_size;
        est.delay = estimate_delays(obs, cfg, delay_opts);
    }
    est.doa_iterations = est.doa.irls.iterations;
    est.delay_iterations = est.delay.irls.iterations;

    Eigen::MatrixXcd Yc = compensated(obs);
    const Eigen::VectorXcd z = Eigen::Map<const Eigen::VectorXcd>(Yc.data(), Yc.size());
    const SignatureFn sig = [&](double phi, double tau) {
        return squint_aware ? path_signature(phi, tau, cfg, obs.subcarriers)
                            : narrowband_signature(phi, tau, cfg, obs.subcarriers);
    };
    const PairList pairs = pair_with_model(est.doa.phi, est.delay.tau, z, sig);
    const int n = static_cast<int>(pairs.size());
    est.paths.phi.resize(n);
    est.paths.tau.resize(n);
    est.paths.beta = Eigen::VectorXcd::Zero(n);
    for (int p = 0; p < n; ++p) {
        est.paths.phi[p] = est.doa.phi[pairs[p].first];
        est.paths.tau[p] = est.delay.tau[pairs[p].second];
    }
    if (n > 0) {
        Eigen::MatrixXcd B(z.size(), n);
        for (int p = 0; p < n; ++p) B.col(p) = sig_vec(sig, est.paths.phi[p], est.paths.tau[p]);
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-10);
        est.paths.beta = svd.solve(z);
    }
    est.H = squint_aware ? channel_matrix(est.paths, cfg, Carrier::Uplink)
                         : narrowband_channel(est.paths, cfg);
    return est;
}

}  // namespace bsq
