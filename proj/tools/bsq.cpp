// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bsq/bench.hpp"
#include "bsq/io.hpp"

namespace {

std::vector<bsq::EstimatorKind> parse_estimator_list(const std::string& list) {
    std::vector<bsq::EstimatorKind> kinds;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) kinds.push_back(bsq::parse_estimator(item));
    return kinds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint"};
    app.require_subcommand(1);

    std::string config_path, out_path, in_path, estimators_str, axis_str;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int trials = 0, parallel = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config file (key=value)");
        cmd->add_option("--seed", seed, "master seed")->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--out", out_path, "output path");
        cmd->add_option("--estimators", estimators_str,
                        "comma list: proposed,ongrid_omp,grid_refine,offgrid_nobse,offgrid_nommv");
        cmd->add_option("--axis", axis_str, "sweep axis: snr | bandwidth | antennas");
        cmd->add_option("--trials", trials, "Monte-Carlo trials per sweep value");
        cmd->add_option("--parallel", parallel, "worker count");
        cmd->add_option("--in", in_path, "input file (estimate/report)");
    };

    CLI::App* sim = app.add_subcommand("simulate", "draw one channel + observation to a file");
    CLI::App* est = app.add_subcommand("estimate", "run estimators on a stored observation");
    CLI::App* swp = app.add_subcommand("sweep", "run a Monte-Carlo sweep from a config file");
    CLI::App* rep = app.add_subcommand("report", "aggregate a sweep CSV into per-point means");
    for (CLI::App* c : {sim, est, swp, rep}) add_common(c);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            if (config_path.empty() || out_path.empty())
                throw std::runtime_error("simulate requires --config and --out");
            bsq::ExperimentSpec spec = bsq::load_experiment_config(config_path);
            if (seed_set) spec.seed = seed;
            bsq::Scene scene;
            scene.cfg = spec.cfg;
            std::mt19937_64 path_rng = bsq::make_rng(spec.seed, 0x100000);
            scene.truth = bsq::draw_paths(path_rng, spec.paths, scene.cfg);
            const Eigen::MatrixXcd H = bsq::channel_matrix(scene.truth, scene.cfg);
            const bsq::PilotAllocation alloc = bsq::allocate_pilots(scene.cfg);
            std::mt19937_64 noise_rng = bsq::make_rng(spec.seed, 0x200000);
            scene.obs = bsq::observe_uplink(H, alloc, 0, spec.snr_db, noise_rng);
            scene.obs.seed = spec.seed;
            bsq::save_scene(scene, out_path);
            std::cout << "wrote scene: " << out_path << "\n";
        } else if (est->parsed()) {
            if (in_path.empty() || out_path.empty())
                throw std::runtime_error("estimate requires --in SCENE and --out PATH");
            const bsq::Scene scene = bsq::load_scene(in_path);
            const auto kinds = estimators_str.empty()
                                   ? std::vector<bsq::EstimatorKind>{bsq::EstimatorKind::Proposed}
                                   : parse_estimator_list(estimators_str);
            for (const auto kind : kinds) {
                bsq::UplinkEstimate ue;
                if (kind == bsq::EstimatorKind::Proposed) {
                    ue = bsq::estimate_uplink(scene.obs, scene.cfg);
                } else {
                    bsq::BaselineKind bk = bsq::BaselineKind::OnGridBlockOMP;
                    if (kind == bsq::EstimatorKind::GridRefinement) bk = bsq::BaselineKind::GridRefinement;
                    if (kind == bsq::EstimatorKind::OffGridNoBSE) bk = bsq::BaselineKind::OffGridNoBSE;
                    if (kind == bsq::EstimatorKind::OffGridNoMMV) bk = bsq::BaselineKind::OffGridNoMMV;
                    ue = bsq::estimate_uplink_baseline(bk, scene.obs, scene.cfg);
                }
                const std::string path = kinds.size() == 1
                                             ? out_path
                                             : out_path + "." + bsq::estimator_name(kind) + ".json";
                bsq::save_uplink_estimate(ue, scene.cfg, path);
                std::cout << bsq::estimator_name(kind) << ": wrote " << path << "\n";
            }
        } else if (swp->parsed()) {
            if (config_path.empty() || out_path.empty())
                throw std::runtime_error("sweep requires --config and --out");
            bsq::ExperimentSpec spec = bsq::load_experiment_config(config_path);
            if (seed_set) spec.seed = seed;
            if (trials > 0) spec.trials = trials;
            if (parallel > 0) spec.parallel = parallel;
            if (!axis_str.empty()) spec.axis = bsq::parse_axis(axis_str);
            if (!estimators_str.empty()) spec.estimators = parse_estimator_list(estimators_str);
            const auto rows = bsq::run_sweep(spec);
            bsq::write_csv(rows, out_path);
            bsq::write_timing_sidecar(rows, out_path + ".timing");
            std::cout << "wrote " << rows.size() << " rows: " << out_path << "\n";
        } else if (rep->parsed()) {
            if (in_path.empty() || out_path.empty())
                throw std::runtime_error("report requires --in CSV and --out PATH");
            const auto rows = bsq::read_csv(in_path);
            bsq::write_aggregate_csv(bsq::aggregate(rows), out_path);
            std::cout << "wrote aggregate: " << out_path << "\n";
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
