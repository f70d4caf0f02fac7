// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "bsq/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace bsq {

namespace {

constexpr std::uint64_t kPathStream = 0x100000;
constexpr std::uint64_t kNoiseStream = 0x200000;
constexpr std::uint64_t kDownlinkStream = 0x300000;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

SystemConfig apply_axis(const ExperimentSpec& spec, double value) {
    SystemConfig cfg = spec.cfg;
    switch (spec.axis) {
        case SweepAxis::Snr: break;
        case SweepAxis::Bandwidth: cfg.f0 = value / cfg.N; break;
        case SweepAxis::Antennas: cfg.M = static_cast<int>(value); break;
    }
    return cfg;
}

double axis_snr(const ExperimentSpec& spec, double value) {
    return spec.axis == SweepAxis::Snr ? value : spec.snr_db;
}

MetricRow run_one(const ExperimentSpec& spec, int value_index, int trial, EstimatorKind kind,
                  int est_index, const SystemConfig& cfg, const PathSet& truth,
                  const Eigen::MatrixXcd& H, const Observation& obs, double snr_db) {
    MetricRow row;
    row.sweep_value = spec.values[value_index];
    row.estimator = estimator_name(kind);
    row.trial = trial;

    const auto t0 = std::chrono::steady_clock::now();
    try {
        UplinkEstimate est;
        if (kind == EstimatorKind::Proposed) {
            UplinkOptions opts;
            opts.doa.L_initial = spec.grid_size;
            opts.delay.L_initial = spec.grid_size;
            est = estimate_uplink(obs, cfg, opts);
        } else {
            BaselineOptions opts;
            opts.grid_size = spec.grid_size;
            opts.max_paths = spec.paths;
            opts.irls.L_initial = spec.grid_size;
            BaselineKind bk = BaselineKind::OnGridBlockOMP;
            if (kind == EstimatorKind::GridRefinement) bk = BaselineKind::GridRefinement;
            if (kind == EstimatorKind::OffGridNoBSE) bk = BaselineKind::OffGridNoBSE;
            if (kind == EstimatorKind::OffGridNoMMV) bk = BaselineKind::OffGridNoMMV;
            est = estimate_uplink_baseline(bk, obs, cfg, opts);
        }

        const MatchStats ma = mse_angles(truth.phi, est.doa.phi);
        std::vector<double> taus(est.paths.tau.data(), est.paths.tau.data() + est.paths.tau.size());
        if (taus.empty()) taus = est.delay.tau;
        const MatchStats mt = mse_delays(truth.tau, taus, cfg);

        row.mse_phi = ma.mse;
        row.mse_tau = mt.mse;
        row.missed = ma.missed;
        row.false_alarms = ma.false_alarms;
        row.p_hat = static_cast<int>(est.doa.phi.size());
        row.iterations = est.doa_iterations + est.delay_iterations;
        row.nmse_ul = nmse(H, est.H);

        if (spec.downlink) {
            PathSet true_dl = reciprocal_params(truth, cfg);
            std::mt19937_64 dl_rng = make_rng(
                spec.seed, kDownlinkStream + static_cast<std::uint64_t>(trial) * 64 + est_index);
            for (int p = 0; p < true_dl.size(); ++p) true_dl.beta[p] = draw_cn(dl_rng, 1.0);
            const Eigen::MatrixXcd H_dl = channel_matrix(true_dl, cfg, Carrier::Downlink);
            const DownlinkEstimate dl = estimate_downlink(est, true_dl, snr_db, dl_rng, cfg);
            row.nmse_dl = nmse(H_dl, dl.H_dl);
        } else {
            row.nmse_dl = std::numeric_limits<double>::quiet_NaN();
        }
    } catch (const std::exception&) {
        row.failed = true;
        row.mse_phi = row.mse_tau = row.nmse_ul = row.nmse_dl =
            std::numeric_limits<double>::quiet_NaN();
    }
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

}  // namespace

std::string estimator_name(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::Proposed: return "proposed";
        case EstimatorKind::OnGridBlockOMP: return "ongrid_omp";
        case EstimatorKind::GridRefinement: return "grid_refine";
        case EstimatorKind::OffGridNoBSE: return "offgrid_nobse";
        case EstimatorKind::OffGridNoMMV: return "offgrid_nommv";
    }
    throw std::invalid_argument("unknown estimator kind");
}

EstimatorKind parse_estimator(const std::string& name) {
    if (name == "proposed") return EstimatorKind::Proposed;
    if (name == "ongrid_omp") return EstimatorKind::OnGridBlockOMP;
    if (name == "grid_refine") return EstimatorKind::GridRefinement;
    if (name == "offgrid_nobse") return EstimatorKind::OffGridNoBSE;
    if (name == "offgrid_nommv") return EstimatorKind::OffGridNoMMV;
    throw std::invalid_argument("unknown estimator: " + name);
}

std::string axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Snr: return "snr";
        case SweepAxis::Bandwidth: return "bandwidth";
        case SweepAxis::Antennas: return "antennas";
    }
    throw std::invalid_argument("unknown axis");
}

SweepAxis parse_axis(const std::string& name) {
    if (name == "snr") return SweepAxis::Snr;
    if (name == "bandwidth") return SweepAxis::Bandwidth;
    if (name == "antennas") return SweepAxis::Antennas;
    throw std::invalid_argument("unknown sweep axis: " + name);
}

void ExperimentSpec::validate() const {
    cfg.validate();
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (paths < 1) throw std::invalid_argument("paths must be >= 1");
    if (parallel < 1) throw std::invalid_argument("parallel must be >= 1");
    if (grid_size < 1) throw std::invalid_argument("grid_size must be >= 1");
    if (values.empty()) throw std::invalid_argument("sweep values must be nonempty");
    if (estimators.empty()) throw std::invalid_argument("estimator list must be nonempty");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("sweep values must be finite");
    if (!std::is_sorted(values.begin(), values.end()))
        throw std::invalid_argument("sweep values must be sorted ascending");
    for (double v : values) {
        const SystemConfig c = apply_axis(*this, v);
        c.validate();
    }
}

std::vector<MetricRow> run_sweep(const ExperimentSpec& spec) {
    spec.validate();
    const int V = static_cast<int>(spec.values.size());
    const int E = static_cast<int>(spec.estimators.size());
    const int J = spec.trials;

    // rows indexed [value][estimator][trial]; tasks iterate (value, trial)
    // so that one task reuses the shared channel/observation draw.
    std::vector<MetricRow> rows(static_cast<std::size_t>(V) * E * J);
    std::atomic<int> cursor{0};
    const int tasks = V * J;

    auto worker = [&]() {
        for (int t = cursor.fetch_add(1); t < tasks; t = cursor.fetch_add(1)) {
            const int vi = t / J;
            const int trial = t % J;
            const SystemConfig cfg = apply_axis(spec, spec.values[vi]);
            const double snr_db = axis_snr(spec, spec.values[vi]);

            std::mt19937_64 path_rng = make_rng(spec.seed, kPathStream + trial);
            const PathSet truth = draw_paths(path_rng, spec.paths, cfg);
            const Eigen::MatrixXcd H = channel_matrix(truth, cfg);
            const PilotAllocation alloc = allocate_pilots(cfg);
            std::mt19937_64 noise_rng = make_rng(spec.seed, kNoiseStream + trial);
            const Observation obs = observe_uplink(H, alloc, 0, snr_db, noise_rng);

            for (int e = 0; e < E; ++e) {
                rows[(static_cast<std::size_t>(vi) * E + e) * J + trial] =
                    run_one(spec, vi, trial, spec.estimators[e], e, cfg, truth, H, obs, snr_db);
            }
        }
    };

    const int W = std::min(spec.parallel, tasks);
    if (W <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < W; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return rows;
}

std::string csv_header() {
    return "sweep_value,estimator,trial,mse_phi,mse_tau,nmse_ul,nmse_dl,p_hat,iterations,"
           "missed,false_alarms,failed";
}

std::string csv_row(const MetricRow& r) {
    std::ostringstream os;
    os << fmt_double(r.sweep_value) << ',' << r.estimator << ',' << r.trial << ','
       << fmt_double(r.mse_phi) << ',' << fmt_double(r.mse_tau) << ',' << fmt_double(r.nmse_ul)
       << ',' << fmt_double(r.nmse_dl) << ',' << r.p_hat << ',' << r.iterations << ',' << r.missed
       << ',' << r.false_alarms << ',' << (r.failed ? 1 : 0);
    return os.str();
}

void write_csv(const std::vector<MetricRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << csv_header() << '\n';
    for (const MetricRow& r : rows) out << csv_row(r) << '\n';
}

void write_timing_sidecar(const std::vector<MetricRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << "sweep_value,estimator,trial,wall_seconds\n";
    for (const MetricRow& r : rows)
        out << fmt_double(r.sweep_value) << ',' << r.estimator << ',' << r.trial << ','
            << fmt_double(r.wall_seconds) << '\n';
}

std::vector<MetricRow> read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
    if (line != csv_header()) throw std::runtime_error("unexpected CSV header in " + path);
    std::vector<MetricRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f;
        MetricRow r;
        auto next = [&]() {
            if (!std::getline(ss, f, ',')) throw std::runtime_error("short CSV row in " + path);
            return f;
        };
        r.sweep_value = std::stod(next());
        r.estimator = next();
        r.trial = std::stoi(next());
        r.mse_phi = std::stod(next());
        r.mse_tau = std::stod(next());
        r.nmse_ul = std::stod(next());
        r.nmse_dl = std::stod(next());
        r.p_hat = std::stoi(next());
        r.iterations = std::stoi(next());
        r.missed = std::stoi(next());
        r.false_alarms = std::stoi(next());
        r.failed = std::stoi(next()) != 0;
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<AggregateRow> aggregate(const std::vector<MetricRow>& rows) {
    std::map<std::pair<double, std::string>, AggregateRow> acc;
    std::vector<std::pair<double, std::string>> order;
    for (const MetricRow& r : rows) {
        const auto key = std::make_pair(r.sweep_value, r.estimator);
        auto it = acc.find(key);
        if (it == acc.end()) {
            AggregateRow a;
            a.sweep_value = r.sweep_value;
            a.estimator = r.estimator;
            it = acc.emplace(key, a).first;
            order.push_back(key);
        }
        AggregateRow& a = it->second;
        ++a.trials;
        if (r.failed) {
            ++a.failures;
            continue;
        }
        a.mse_phi += r.mse_phi;
        a.mse_tau += r.mse_tau;
        a.nmse_ul += r.nmse_ul;
        if (std::isfinite(r.nmse_dl)) a.nmse_dl += r.nmse_dl;
        a.mean_p_hat += r.p_hat;
        a.mean_iterations += r.iterations;
    }
    std::vector<AggregateRow> out;
    for (const auto& key : order) {
        AggregateRow a = acc[key];
        const int good = a.trials - a.failures;
        if (good > 0) {
            a.mse_phi /= good;
            a.mse_tau /= good;
            a.nmse_ul /= good;
            a.nmse_dl /= good;
            a.mean_p_hat /= good;
            a.mean_iterations /= good;
        }
        out.push_back(std::move(a));
    }
    return out;
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << "sweep_value,estimator,trials,failures,mse_phi,mse_tau,nmse_ul,nmse_dl,mean_p_hat,"
           "mean_iterations\n";
    for (const AggregateRow& a : rows)
        out << fmt_double(a.sweep_value) << ',' << a.estimator << ',' << a.trials << ','
            << a.failures << ',' << fmt_double(a.mse_phi) << ',' << fmt_double(a.mse_tau) << ','
            << fmt_double(a.nmse_ul) << ',' << fmt_double(a.nmse_dl) << ','
            << fmt_double(a.mean_p_hat) << ',' << fmt_double(a.mean_iterations) << '\n';
}

ExperimentSpec load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    ExperimentSpec spec;
    std::string line;
    int lineno = 0;
    auto parse_list = [](const std::string& s) {
        std::vector<double> vals;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
        return vals;
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        const auto b = line.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r\n");
        line = line.substr(b, e - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
        auto strip = [](std::string s) {
            const auto b2 = s.find_first_not_of(" \t");
            if (b2 == std::string::npos) return std::string();
            const auto e2 = s.find_last_not_of(" \t");
            return s.substr(b2, e2 - b2 + 1);
        };
        const std::string key = strip(line.substr(0, eq));
        const std::string val = strip(line.substr(eq + 1));
        try {
            if (key == "M") spec.cfg.M = std::stoi(val);
            else if (key == "N") spec.cfg.N = std::stoi(val);
            else if (key == "K") spec.cfg.K = std::stoi(val);
            else if (key == "f0") spec.cfg.f0 = std::stod(val);
            else if (key == "bandwidth") spec.cfg.f0 = std::stod(val) / spec.cfg.N;
            else if (key == "fc_ul") spec.cfg.fc_ul = std::stod(val);
            else if (key == "fc_dl") spec.cfg.fc_dl = std::stod(val);
            else if (key == "d_over_lambda") spec.cfg.d_over_lambda = std::stod(val);
            else if (key == "axis") spec.axis = parse_axis(val);
            else if (key == "values") spec.values = parse_list(val);
            else if (key == "trials") spec.trials = std::stoi(val);
            else if (key == "paths") spec.paths = std::stoi(val);
            else if (key == "snr_db") spec.snr_db = std::stod(val);
            else if (key == "seed") spec.seed = std::stoull(val);
            else if (key == "parallel") spec.parallel = std::stoi(val);
            else if (key == "grid_size") spec.grid_size = std::stoi(val);
            else if (key == "downlink") {
                if (val == "true" || val == "1") spec.downlink = true;
                else if (val == "false" || val == "0") spec.downlink = false;
                else throw std::runtime_error("downlink must be true/false/1/0");
            }
            else if (key == "estimators") {
                spec.estimators.clear();
                std::stringstream ss(val);
                std::string item;
                while (std::getline(ss, item, ',')) spec.estimators.push_back(parse_estimator(strip(item)));
            } else {
                throw std::runtime_error("unknown key '" + key + "'");
            }
        } catch (const std::exception& ex) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + ex.what());
        }
    }
    // Note: "bandwidth" divides by the N in effect when the line is read;
    // put N before bandwidth in the file. The loader validates at the end.
    spec.validate();
    return spec;
}

}  // namespace bsq
