// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "bsq/reconstruct.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace bsq {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Pilot-compensated measurement, column-major stacking of the M x T matrix.
Eigen::VectorXcd compensated_vec(const Observation& obs) {
    Eigen::MatrixXcd Yc = obs.Y;
    for (int q = 0; q < Yc.cols(); ++q) Yc.col(q) /= obs.pilot[q];
    return Eigen::Map<const Eigen::VectorXcd>(Yc.data(), Yc.size());
}

Eigen::VectorXcd signature_vec(double phi, double tau, const Observation& obs,
                               const SystemConfig& cfg) {
    const Eigen::MatrixXcd Xi = path_signature(phi, tau, cfg, obs.subcarriers);
    return Eigen::Map<const Eigen::VectorXcd>(Xi.data(), Xi.size());
}

Eigen::MatrixXcd signature_basis(const PathSet& paths, const Observation& obs,
                                 const SystemConfig& cfg) {
    const int P = paths.size();
    Eigen::MatrixXcd B(obs.Y.size(), P);
    for (int p = 0; p < P; ++p) B.col(p) = signature_vec(paths.phi[p], paths.tau[p], obs, cfg);
    return B;
}

void best_assignment(const Eigen::MatrixXd& C, int row, std::vector<bool>& used,
                     std::vector<int>& cur, double acc, std::vector<int>& best, double& best_acc) {
    const int P = static_cast<int>(cur.size());
    const int Q = static_cast<int>(C.cols());
    if (row == P) {
        if (acc > best_acc) {
            best_acc = acc;
            best = cur;
        }
        return;
    }
    for (int j = 0; j < Q; ++j) {
        if (used[j]) continue;
        used[j] = true;
        cur[row] = j;
        best_assignment(C, row + 1, used, cur, acc + C(row, j), best, best_acc);
        used[j] = false;
    }
}

// Residual of the best LS gain fit for the given path triples; the delay
// polish below minimizes this in one delay coordinate at a time.
double ls_residual(const PathSet& paths, const Eigen::VectorXcd& z, const Observation& obs,
                   const SystemConfig& cfg) {
    const Eigen::MatrixXcd B = signature_basis(paths, obs, cfg);
    const Eigen::VectorXcd beta = B.colPivHouseholderQr().solve(z);
    return (z - B * beta).squaredNorm();
}

double golden_section(const std::function<double(double)>& f, double lo, double hi, int iters) {
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iters; ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

PairList pair_paths(const std::vector<double>& phi, const std::vector<double>& tau,
                    const Observation& obs, const SystemConfig& cfg, PairingMode mode) {
    const int P = static_cast<int>(phi.size());
    const int Q = static_cast<int>(tau.size());
    if (P == 0 || Q == 0) return {};
    const Eigen::VectorXcd z = compensated_vec(obs);
    Eigen::MatrixXd C(P, Q);
    for (int i = 0; i < P; ++i)
        for (int j = 0; j < Q; ++j)
            C(i, j) = std::abs(signature_vec(phi[i], tau[j], obs, cfg).dot(z));

    PairList out;
    const int n = std::min(P, Q);
    if (mode == PairingMode::Exhaustive) {
        if (n > 10) throw std::invalid_argument("exhaustive pairing limited to 10 paths");
        // Enumerate over the smaller side to keep the recursion shallow.
        if (P <= Q) {
            std::vector<bool> used(Q, false);
            std::vector<int> cur(P), best;
            double best_acc = -1.0;
            best_assignment(C, 0, used, cur, 0.0, best, best_acc);
            for (int i = 0; i < P; ++i) out.emplace_back(i, best[i]);
        } else {
            std::vector<bool> used(P, false);
            std::vector<int> cur(Q), best;
            double best_acc = -1.0;
            best_assignment(C.transpose(), 0, used, cur, 0.0, best, best_acc);
            for (int j = 0; j < Q; ++j) out.emplace_back(best[j], j);
        }
    } else {
        std::vector<bool> used_i(P, false), used_j(Q, false);
        for (int k = 0; k < n; ++k) {
            double best = -1.0;
            int bi = -1, bj = -1;
            for (int i = 0; i < P; ++i) {
                if (used_i[i]) continue;
                for (int j = 0; j < Q; ++j) {
                    if (used_j[j]) continue;
                    if (C(i, j) > best) {
                        best = C(i, j);
                        bi = i;
                        bj = j;
                    }
                }
            }
            used_i[bi] = used_j[bj] = true;
            out.emplace_back(bi, bj);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

Eigen::VectorXcd estimate_gains(const PathSet& paths, const Observation& obs,
                                const SystemConfig& cfg) {
    if (paths.size() == 0) return Eigen::VectorXcd();
    const Eigen::VectorXcd z = compensated_vec(obs);
    const Eigen::MatrixXcd B = signature_basis(paths, obs, cfg);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-10);
    return svd.solve(z);
}

Eigen::MatrixXcd rebuild_uplink(const PathSet& paths, const SystemConfig& cfg) {
    return channel_matrix(paths, cfg, Carrier::Uplink);
}

UplinkEstimate estimate_uplink(const Observation& obs, const SystemConfig& cfg,
                               const UplinkOptions& opts) {
    UplinkEstimate est;
    est.doa = estimate_doas(obs, cfg, opts.doa);
    est.delay = estimate_delays(obs, cfg, opts.delay);
    est.doa_iterations = est.doa.irls.iterations;
    est.delay_iterations = est.delay.irls.iterations;

    const int P = static_cast<int>(est.doa.phi.size());
    const double tau_max = 1.0 / (cfg.N * cfg.f0);

    // The angle stage fixes the detected path count; reconcile the delay list
    // to it. Surplus delays: keep the strongest. Shortfall: rerun the delay
    // solver without pruning, seeding near the strongest survivors.
    std::vector<double> taus = est.delay.tau;
    std::vector<double> tau_energy(taus.size());
    for (std::size_t j = 0; j < taus.size(); ++j)
        tau_energy[j] = est.delay.coeffs.col(static_cast<int>(j)).squaredNorm();
    if (static_cast<int>(taus.size()) > P) {
        std::vector<int> order(taus.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return tau_energy[a] > tau_energy[b]; });
        std::vector<double> kept;
        for (int k = 0; k < P; ++k) kept.push_back(taus[order[k]]);
        std::sort(kept.begin(), kept.end());
        taus = std::move(kept);
    } else if (static_cast<int>(taus.size()) < P && !taus.empty()) {
        IrlsOptions re = opts.delay;
        re.prune_enabled = false;
        re.max_iterations = std::max(40, re.max_iterations / 4);
        re.initial_grid = taus;
        std::vector<int> order(taus.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return tau_energy[a] > tau_energy[b]; });
        const double off = tau_max / 64.0;
        for (std::size_t k = 0; re.initial_grid.size() < static_cast<std::size_t>(P); ++k) {
            const double base = taus[order[k % order.size()]];
            const double delta = off * (1.0 + static_cast<double>(k / order.size()));
            re.initial_grid.push_back(std::clamp(base + delta, 0.0, tau_max));
            if (re.initial_grid.size() < static_cast<std::size_t>(P))
                re.initial_grid.push_back(std::clamp(base - delta, 0.0, tau_max));
        }
        const DelayEstimate redo = estimate_delays(obs, cfg, re);
        taus = redo.tau;
        // Merging can still shrink the list; pad deterministically so pairing
        // sees the full detected path count (the polish below separates them).
        int k = 1;
        while (static_cast<int>(taus.size()) < P && !taus.empty()) {
            taus.push_back(std::clamp(taus[k % taus.size()] + k * off, 0.0, tau_max));
            ++k;
        }
    }

    const PairList pairs = pair_paths(est.doa.phi, taus, obs, cfg, opts.pairing);
    const int n = static_cast<int>(pairs.size());
    est.paths.phi.resize(n);
    est.paths.tau.resize(n);
    est.paths.beta = Eigen::VectorXcd::Zero(n);
    for (int p = 0; p < n; ++p) {
        est.paths.phi[p] = est.doa.phi[pairs[p].first];
        est.paths.tau[p] = taus[pairs[p].second];
    }

    const Eigen::VectorXcd z = compensated_vec(obs);
    if (opts.refine_delays && n > 0) {
        // The delay dictionary ignores squint, so its delays carry a bias of
        // about (M-1)*phi/(4*pi*fc) and can land far from the truth when the
        // stage had to super-resolve. With the angles fixed the full model is
        // exact, so re-estimate each delay on the full-model LS residual: a
        // coarse scan over the whole delay domain picks the right basin, then
        // a golden-section pass refines inside it. Accept only improvements,
        // and keep the scan away from the other paths' delays so two paths do
        // not collapse onto one atom.
        const double t_hi = std::nextafter(tau_max, 0.0);
        for (int pass = 0; pass < 2; ++pass) {
            for (int p = 0; p < n; ++p) {
                PathSet trial = est.paths;
                const auto objective = [&](double t) {
                    trial.tau[p] = t;
                    return ls_residual(trial, z, obs, cfg);
                };
                const int scan = 96;
                double best_t = est.paths.tau[p];
                double best_v = objective(best_t);
                for (int s = 0; s <= scan; ++s) {
                    const double t = t_hi * s / scan;
                    bool clash = false;
                    for (int q = 0; q < n && !clash; ++q)
                        clash = q != p && std::abs(est.paths.tau[q] - t) < tau_max / 128.0;
                    if (clash) continue;
                    const double v = objective(t);
                    if (v < best_v) {
                        best_v = v;
                        best_t = t;
                    }
                }
                const double w = tau_max / scan;
                const double lo = std::max(0.0, best_t - w);
                const double hi = std::min(t_hi, best_t + w);
                const double refined = golden_section(objective, lo, hi, 48);
                if (objective(refined) < best_v) best_t = refined;
                est.paths.tau[p] = best_t;
            }
        }

        // Paths whose angles nearly coincide have strongly correlated
        // signatures, and the one-coordinate scan above can settle into a
        // joint local minimum of the coupled parameters. Group such paths
        // into clusters and refine them jointly: a 2-D delay rescan per pair,
        // a 2-D (angle, delay) rescan per member starting with the weakest
        // (whose basin is most easily captured by a stronger neighbor), and a
        // final cyclic per-coordinate polish.
        const double couple = 4.0 * kPi / cfg.M;  // two beamwidths
        std::vector<int> comp(n);
        std::iota(comp.begin(), comp.end(), 0);
        const std::function<int(int)> root = [&](int i) {
            while (comp[i] != i) i = comp[i] = comp[comp[i]];
            return i;
        };
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                const double gap =
                    std::abs(std::remainder(est.paths.phi[p] - est.paths.phi[q], 2 * kPi));
                if (gap <= couple) comp[root(p)] = root(q);
            }
        std::vector<std::vector<int>> clusters(n);
        for (int p = 0; p < n; ++p) clusters[root(p)].push_back(p);

        const int scan = 48;
        const double wphi = kPi / cfg.M;  // half a beamwidth

        // Refine the members of one cluster inside a candidate path set and
        // return the final LS residual. Non-members are held fixed.
        const auto refine_cluster = [&](PathSet& ps, const std::vector<int>& cl) {
            // Pairwise joint delay rescan: coupled delays settle into joint
            // local minima that one-coordinate scans cannot leave.
            for (std::size_t a = 0; a < cl.size(); ++a) {
                for (std::size_t b = a + 1; b < cl.size(); ++b) {
                    const int p = cl[a], q = cl[b];
                    PathSet trial = ps;
                    double best_v = ls_residual(trial, z, obs, cfg);
                    double bp = ps.tau[p], bq = ps.tau[q];
                    for (int i = 0; i <= scan; ++i) {
                        trial.tau[p] = t_hi * i / scan;
                        for (int j = 0; j <= scan; ++j) {
                            if (i == j) continue;
                            trial.tau[q] = t_hi * j / scan;
                            const double v = ls_residual(trial, z, obs, cfg);
                            if (v < best_v) {
                                best_v = v;
                                bp = trial.tau[p];
                                bq = trial.tau[q];
                            }
                        }
                    }
                    ps.tau[p] = bp;
                    ps.tau[q] = bq;
                }
            }

            // Joint (angle, delay) rescan per member, weakest first: a weak
            // path squeezed between stronger neighbours must move in both
            // coordinates at once to reach its own basin.
            std::vector<int> order(cl);
            if (cl.size() > 1) {
                const Eigen::VectorXcd g = estimate_gains(ps, obs, cfg);
                std::sort(order.begin(), order.end(), [&](int a, int b) {
                    return std::norm(g[a]) < std::norm(g[b]);
                });
            }
            double lo_phi = ps.phi[cl[0]], hi_phi = lo_phi;
            for (int r : cl) {
                lo_phi = std::min(lo_phi, ps.phi[r]);
                hi_phi = std::max(hi_phi, ps.phi[r]);
            }
            lo_phi -= 2 * wphi;
            hi_phi += 2 * wphi;
            const int fscan = 32;
            for (int r : order) {
                PathSet trial = ps;
                double best_v = ls_residual(trial, z, obs, cfg);
                double bf = ps.phi[r], bt = ps.tau[r];
                for (int i = 0; i <= fscan; ++i) {
                    trial.phi[r] = lo_phi + (hi_phi - lo_phi) * i / fscan;
                    for (int j = 0; j <= scan; ++j) {
                        trial.tau[r] = t_hi * j / scan;
                        const double v = ls_residual(trial, z, obs, cfg);
                        if (v < best_v) {
                            best_v = v;
                            bf = trial.phi[r];
                            bt = trial.tau[r];
                        }
                    }
                }
                ps.tau[r] = bt;
                ps.phi[r] = bf;
            }

            // Cyclic per-coordinate polish over the whole cluster.
            const double w2 = t_hi / scan;
            for (int pass = 0; pass < 3; ++pass) {
                for (int r : cl) {
                    PathSet t2 = ps;
                    const auto obj_tau = [&](double t) {
                        t2.tau[r] = t;
                        return ls_residual(t2, z, obs, cfg);
                    };
                    double cur = obj_tau(ps.tau[r]);
                    double refined = golden_section(obj_tau, std::max(0.0, ps.tau[r] - w2),
                                                    std::min(t_hi, ps.tau[r] + w2), 48);
                    if (obj_tau(refined) < cur) ps.tau[r] = refined;
                    t2 = ps;
                    const auto obj_phi = [&](double f) {
                        t2.phi[r] = f;
                        return ls_residual(t2, z, obs, cfg);
                    };
                    cur = obj_phi(ps.phi[r]);
                    refined =
                        golden_section(obj_phi, ps.phi[r] - wphi, ps.phi[r] + wphi, 48);
                    if (obj_phi(refined) < cur) ps.phi[r] = refined;
                }
            }

            // Correlated neighbours fold the residual surface into narrow
            // valleys that run diagonally in (angle, delay); one-coordinate
            // moves stall on their walls. Finish with a compass-plus-diagonal
            // pattern search per member with a shrinking step.
            for (int pass = 0; pass < 2; ++pass) {
                for (int r : cl) {
                    double sp = wphi / 4, st = w2 / 2;
                    PathSet t2 = ps;
                    double cur = ls_residual(t2, z, obs, cfg);
                    for (int it = 0; it < 24; ++it) {
                        bool moved = false;
                        for (int dp = -1; dp <= 1; ++dp) {
                            for (int dt = -1; dt <= 1; ++dt) {
                                if (dp == 0 && dt == 0) continue;
                                t2.phi[r] = ps.phi[r] + dp * sp;
                                t2.tau[r] = std::clamp(ps.tau[r] + dt * st, 0.0, t_hi);
                                const double v = ls_residual(t2, z, obs, cfg);
                                if (v < cur) {
                                    cur = v;
                                    ps.phi[r] = t2.phi[r];
                                    ps.tau[r] = t2.tau[r];
                                    moved = true;
                                }
                                t2.phi[r] = ps.phi[r];
                                t2.tau[r] = ps.tau[r];
                            }
                        }
                        if (!moved) {
                            sp *= 0.5;
                            st *= 0.5;
                            if (sp < 1e-7 && st < 1e-7 * t_hi) break;
                        }
                    }
                }
            }

            // A correlated pair can sit in a minimum that only a simultaneous
            // move of both members escapes; search the pair's four
            // coordinates jointly the same way.
            for (std::size_t a = 0; a < cl.size(); ++a) {
                for (std::size_t b = a + 1; b < cl.size(); ++b) {
                    const int r1 = cl[a], r2 = cl[b];
                    double sp = wphi / 4, st = w2 / 2;
                    PathSet t2 = ps;
                    double cur = ls_residual(t2, z, obs, cfg);
                    const auto sync = [&] {
                        t2.phi[r1] = ps.phi[r1];
                        t2.tau[r1] = ps.tau[r1];
                        t2.phi[r2] = ps.phi[r2];
                        t2.tau[r2] = ps.tau[r2];
                    };
                    for (int it = 0; it < 24; ++it) {
                        bool moved = false;
                        for (int d = 0; d < 81; ++d) {
                            const int e1p = d % 3 - 1, e1t = d / 3 % 3 - 1;
                            const int e2p = d / 9 % 3 - 1, e2t = d / 27 - 1;
                            if (e1p == 0 && e1t == 0 && e2p == 0 && e2t == 0) continue;
                            t2.phi[r1] = ps.phi[r1] + e1p * sp;
                            t2.tau[r1] = std::clamp(ps.tau[r1] + e1t * st, 0.0, t_hi);
                            t2.phi[r2] = ps.phi[r2] + e2p * sp;
                            t2.tau[r2] = std::clamp(ps.tau[r2] + e2t * st, 0.0, t_hi);
                            const double v = ls_residual(t2, z, obs, cfg);
                            if (v < cur) {
                                cur = v;
                                ps.phi[r1] = t2.phi[r1];
                                ps.tau[r1] = t2.tau[r1];
                                ps.phi[r2] = t2.phi[r2];
                                ps.tau[r2] = t2.tau[r2];
                                moved = true;
                            }
                            sync();
                        }
                        if (!moved) {
                            sp *= 0.5;
                            st *= 0.5;
                            if (sp < 1e-7 && st < 1e-7 * t_hi) break;
                        }
                    }
                }
            }
            return ls_residual(ps, z, obs, cfg);
        };

        for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
            const std::vector<int>& cl = clusters[ci];
            if (cl.size() < 2) continue;

            // Remember the pre-refinement angles so the reported angle list
            // can be kept consistent after the cluster is rewritten.
            std::vector<double> old_phi(cl.size());
            for (std::size_t a = 0; a < cl.size(); ++a) old_phi[a] = est.paths.phi[cl[a]];

            PathSet full = est.paths;
            const double res_full = refine_cluster(full, cl);

            // A split or spurious atom inside the cluster misallocates the
            // model's degrees of freedom, and perturbing the existing atoms
            // cannot recover while it stays. Rebuild the cluster greedily
            // from scratch with one atom fewer — insert atoms one at a time
            // at the joint (angle, delay) residual minimum, then refine —
            // and keep the smaller model if it fits nearly as well. A
            // redundant atom costs only noise-level residual, while a
            // genuine path's removal returns its whole energy.
            const double nv = std::max(est.doa.irls.noise_var, 0.0);
            const double red_tol = std::max(20.0 * nv, 1e-9 * z.squaredNorm());
            double clo = est.paths.phi[cl[0]], chi = clo;
            for (int r : cl) {
                clo = std::min(clo, est.paths.phi[r]);
                chi = std::max(chi, est.paths.phi[r]);
            }
            clo -= 2 * wphi;
            chi += 2 * wphi;
            const int m = est.paths.size();
            const int keep = m - static_cast<int>(cl.size());
            PathSet red;
            red.phi.resize(keep);
            red.tau.resize(keep);
            red.beta = Eigen::VectorXcd::Zero(keep);
            for (int q = 0, k = 0; q < m; ++q) {
                if (std::find(cl.begin(), cl.end(), q) != cl.end()) continue;
                red.phi[k] = est.paths.phi[q];
                red.tau[k] = est.paths.tau[q];
                ++k;
            }
            std::vector<int> mem;
            const int fscan = 32;
            for (std::size_t t = 0; t + 1 < cl.size(); ++t) {
                const int idx = red.size();
                red.phi.conservativeResize(idx + 1);
                red.tau.conservativeResize(idx + 1);
                red.beta = Eigen::VectorXcd::Zero(idx + 1);
                PathSet trial = red;
                double best_v = std::numeric_limits<double>::infinity();
                double bf = 0.5 * (clo + chi), bt = 0.0;
                for (int i = 0; i <= fscan; ++i) {
                    trial.phi[idx] = clo + (chi - clo) * i / fscan;
                    for (int j = 0; j <= scan; ++j) {
                        trial.tau[idx] = t_hi * j / scan;
                        const double v = ls_residual(trial, z, obs, cfg);
                        if (v < best_v) {
                            best_v = v;
                            bf = trial.phi[idx];
                            bt = trial.tau[idx];
                        }
                    }
                }
                red.phi[idx] = bf;
                red.tau[idx] = bt;
                mem.push_back(idx);
            }
            const double res_red = refine_cluster(red, mem);
            if (std::getenv("BSQ_CLUSTER_DEBUG"))
                std::fprintf(stderr, "cluster ci=%zu res_red=%.6g res_full=%.6g tol=%.6g nv=%.3g\n",
                             ci, res_red, res_full, red_tol, nv);

            if (res_red - res_full <= red_tol) {
                // The reduced model explains the data: commit it. Old member
                // angles leave the reported angle list; new ones join it.
                for (std::size_t a = 0; a < cl.size(); ++a)
                    for (std::size_t i = 0; i < est.doa.phi.size(); ++i)
                        if (est.doa.phi[i] == old_phi[a]) {
                            est.doa.phi.erase(est.doa.phi.begin() +
                                              static_cast<std::ptrdiff_t>(i));
                            break;
                        }
                for (int k : mem) est.doa.phi.push_back(red.phi[k]);
                est.paths = std::move(red);
                // Later clusters index the original path list; remap them.
                for (std::size_t cj = ci + 1; cj < clusters.size(); ++cj)
                    for (int& idx : clusters[cj]) {
                        int shift = 0;
                        for (int c : cl)
                            if (c < idx) ++shift;
                        idx -= shift;
                    }
            } else {
                for (std::size_t a = 0; a < cl.size(); ++a)
                    for (std::size_t i = 0; i < est.doa.phi.size(); ++i)
                        if (est.doa.phi[i] == old_phi[a]) {
                            est.doa.phi[i] = full.phi[cl[a]];
                            break;
                        }
                est.paths = std::move(full);
            }
        }
    }

    // A spurious detection soaks up a little noise energy and skews the gains
    // of the paths around it. Drop any path whose removal barely raises the
    // LS residual; a genuine path's removal returns its whole energy.
    if (opts.refine_delays && est.paths.size() > 1) {
        const double nv = std::max(est.doa.irls.noise_var, 0.0);
        bool dropped = true;
        while (dropped && est.paths.size() > 1) {
            dropped = false;
            const double base = ls_residual(est.paths, z, obs, cfg);
            const int m = est.paths.size();
            for (int p = 0; p < m; ++p) {
                PathSet rest;
                rest.phi.resize(m - 1);
                rest.tau.resize(m - 1);
                rest.beta = Eigen::VectorXcd::Zero(m - 1);
                for (int q = 0, k = 0; q < m; ++q) {
                    if (q == p) continue;
                    rest.phi[k] = est.paths.phi[q];
                    rest.tau[k] = est.paths.tau[q];
                    ++k;
                }
                const double without = ls_residual(rest, z, obs, cfg);
                if (without - base < std::max(20.0 * nv, 1e-9 * z.squaredNorm())) {
                    const double gone = est.paths.phi[p];
                    est.paths = std::move(rest);
                    for (std::size_t i = 0; i < est.doa.phi.size(); ++i)
                        if (est.doa.phi[i] == gone) {
                            est.doa.phi.erase(est.doa.phi.begin() +
                                              static_cast<std::ptrdiff_t>(i));
                            break;
                        }
                    dropped = true;
                    break;
                }
            }
        }
    }

    est.paths.beta = estimate_gains(est.paths, obs, cfg);
    est.H = rebuild_uplink(est.paths, cfg);
    return est;
}

}  // namespace bsq
