// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include <benchmark/benchmark.h>

#include "bsq/baselines.hpp"
#include "bsq/reconstruct.hpp"

using namespace bsq;

namespace {

SystemConfig config(int M) {
    SystemConfig cfg;
    cfg.M = M;
    cfg.N = 64;
    cfg.K = 8;
    cfg.f0 = 1e9 / 64;
    return cfg;
}

Observation make_observation(const SystemConfig& cfg, int paths, double snr_db) {
    std::mt19937_64 path_rng = make_rng(7, 1);
    std::mt19937_64 noise_rng = make_rng(7, 2);
    const PathSet truth = draw_paths(path_rng, paths, cfg);
    const PilotAllocation alloc = allocate_pilots(cfg);
    return observe_uplink(channel_matrix(truth, cfg), alloc, 0, snr_db, noise_rng);
}

void BM_ChannelSynthesis(benchmark::State& state) {
    const SystemConfig cfg = config(static_cast<int>(state.range(0)));
    std::mt19937_64 rng = make_rng(7, 1);
    const PathSet paths = draw_paths(rng, 6, cfg);
    for (auto _ : state) benchmark::DoNotOptimize(channel_matrix(paths, cfg));
}
BENCHMARK(BM_ChannelSynthesis)->Arg(32)->Arg(64)->Arg(128);

void BM_SignatureCorrelation(benchmark::State& state) {
    const SystemConfig cfg = config(64);
    for (auto _ : state)
        benchmark::DoNotOptimize(signature_correlation(0.3, 1e-10, -0.9, 5e-10, cfg));
}
BENCHMARK(BM_SignatureCorrelation);

void BM_DoaEstimation(benchmark::State& state) {
    const SystemConfig cfg = config(static_cast<int>(state.range(0)));
    const Observation obs = make_observation(cfg, 4, 20.0);
    for (auto _ : state) benchmark::DoNotOptimize(estimate_doas(obs, cfg));
}
BENCHMARK(BM_DoaEstimation)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_DelayEstimation(benchmark::State& state) {
    const SystemConfig cfg = config(static_cast<int>(state.range(0)));
    const Observation obs = make_observation(cfg, 4, 20.0);
    for (auto _ : state) benchmark::DoNotOptimize(estimate_delays(obs, cfg));
}
BENCHMARK(BM_DelayEstimation)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_UplinkPipeline(benchmark::State& state) {
    const SystemConfig cfg = config(64);
    const Observation obs = make_observation(cfg, static_cast<int>(state.range(0)), 20.0);
    for (auto _ : state) benchmark::DoNotOptimize(estimate_uplink(obs, cfg));
}
BENCHMARK(BM_UplinkPipeline)->Arg(2)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_OnGridBlockOmp(benchmark::State& state) {
    const SystemConfig cfg = config(64);
    const Observation obs = make_observation(cfg, 6, 20.0);
    for (auto _ : state) benchmark::DoNotOptimize(ongrid_block_omp(obs, cfg));
}
BENCHMARK(BM_OnGridBlockOmp)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
