// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef BSQ_BENCH_HPP
#define BSQ_BENCH_HPP

#include <optional>
#include <string>

#include "bsq/baselines.hpp"
#include "bsq/downlink.hpp"
#include "bsq/metrics.hpp"

namespace bsq {

/// Estimators the harness can run. Proposed = the squint-aware off-grid
/// block-sparse pipeline; the rest are the controlled ablations.
enum class EstimatorKind { Proposed, OnGridBlockOMP, GridRefinement, OffGridNoBSE, OffGridNoMMV };

std::string estimator_name(EstimatorKind kind);
EstimatorKind parse_estimator(const std::string& name);

enum class SweepAxis { Snr, Bandwidth, Antennas };

std::string axis_name(SweepAxis axis);
SweepAxis parse_axis(const std::string& name);

/// One Monte-Carlo experiment: a sweep over one axis, J trials per value,
/// a fixed estimator set, and a master seed.
struct ExperimentSpec {
    SystemConfig cfg;
    SweepAxis axis = SweepAxis::Snr;
    std::vector<double> values;   // dB / Hz bandwidth / antenna count, sorted
    int trials = 50;
    int paths = 6;
    double snr_db = 10.0;         // fixed SNR when the axis is not SNR
    std::vector<EstimatorKind> estimators = {EstimatorKind::Proposed};
    std::uint64_t seed = 1;
    int parallel = 1;
    int grid_size = 128;          // initial grid size for all estimators
    bool downlink = true;         // also run the downlink stage per trial

    void validate() const;
};

/// Per-(sweep value, estimator, trial) metrics. Wall time is collected but
/// kept out of the deterministic CSV (see write_csv / write_timing_sidecar).
struct MetricRow {
    double sweep_value = 0.0;
    std::string estimator;
    int trial = 0;
    double mse_phi = 0.0;
    double mse_tau = 0.0;         // normalized 1/(N*f0) units
    double nmse_ul = 0.0;
    double nmse_dl = 0.0;
    int p_hat = 0;
    int iterations = 0;
    int missed = 0;
    int false_alarms = 0;
    bool failed = false;
    double wall_seconds = 0.0;    // not serialized in the main CSV
};

/// Runs the experiment. Rows are ordered by (sweep value, estimator, trial)
/// and are byte-reproducible for a fixed spec and seed.
std::vector<MetricRow> run_sweep(const ExperimentSpec& spec);

/// Deterministic UTF-8 CSV with a one-line header. The optional sidecar holds
/// the (non-deterministic) wall-clock timings with the same row ordering.
std::string csv_header();
std::string csv_row(const MetricRow& row);
void write_csv(const std::vector<MetricRow>& rows, const std::string& path);
void write_timing_sidecar(const std::vector<MetricRow>& rows, const std::string& path);
std::vector<MetricRow> read_csv(const std::string& path);

/// Per-(sweep value, estimator) means over non-failed trials.
struct AggregateRow {
    double sweep_value = 0.0;
    std::string estimator;
    int trials = 0;
    int failures = 0;
    double mse_phi = 0.0;
    double mse_tau = 0.0;
    double nmse_ul = 0.0;
    double nmse_dl = 0.0;
    double mean_p_hat = 0.0;
    double mean_iterations = 0.0;
};
std::vector<AggregateRow> aggregate(const std::vector<MetricRow>& rows);
void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path);

/// Loads an ExperimentSpec from a key=value config file (schema in README),
/// throwing on unknown keys or invalid values.
ExperimentSpec load_experiment_config(const std::string& path);

}  // namespace bsq

#endif  // BSQ_BENCH_HPP
