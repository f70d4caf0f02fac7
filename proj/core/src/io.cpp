// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "bsq/io.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace bsq {

namespace {
using json = nlohmann::json;

json cvec_to_json(const Eigen::VectorXcd& v) {
    json arr = json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back({v[i].real(), v[i].imag()});
    return arr;
}

Eigen::VectorXcd json_to_cvec(const json& arr) {
    Eigen::VectorXcd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i)
        v[static_cast<int>(i)] = cplx(arr[i][0].get<double>(), arr[i][1].get<double>());
    return v;
}

json cmat_to_json(const Eigen::MatrixXcd& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXcd json_to_cmat(const json& rows) {
    const int R = static_cast<int>(rows.size());
    const int C = R > 0 ? static_cast<int>(rows[0].size()) : 0;
    Eigen::MatrixXcd m(R, C);
    for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c)
            m(r, c) = cplx(rows[r][c][0].get<double>(), rows[r][c][1].get<double>());
    return m;
}

json cfg_to_json(const SystemConfig& cfg) {
    return json{{"M", cfg.M},         {"N", cfg.N},
                {"K", cfg.K},         {"f0", cfg.f0},
                {"fc_ul", cfg.fc_ul}, {"fc_dl", cfg.fc_dl},
                {"d_over_lambda", cfg.d_over_lambda}};
}

SystemConfig json_to_cfg(const json& j) {
    SystemConfig cfg;
    cfg.M = j.at("M").get<int>();
    cfg.N = j.at("N").get<int>();
    cfg.K = j.at("K").get<int>();
    cfg.f0 = j.at("f0").get<double>();
    cfg.fc_ul = j.at("fc_ul").get<double>();
    cfg.fc_dl = j.at("fc_dl").get<double>();
    cfg.d_over_lambda = j.at("d_over_lambda").get<double>();
    cfg.validate();
    return cfg;
}

json paths_to_json(const PathSet& paths) {
    json j;
    j["phi"] = std::vector<double>(paths.phi.data(), paths.phi.data() + paths.phi.size());
    j["tau"] = std::vector<double>(paths.tau.data(), paths.tau.data() + paths.tau.size());
    j["beta"] = cvec_to_json(paths.beta);
    return j;
}

PathSet json_to_paths(const json& j) {
    PathSet p;
    const auto phi = j.at("phi").get<std::vector<double>>();
    const auto tau = j.at("tau").get<std::vector<double>>();
    p.phi = Eigen::Map<const Eigen::VectorXd>(phi.data(), static_cast<int>(phi.size()));
    p.tau = Eigen::Map<const Eigen::VectorXd>(tau.data(), static_cast<int>(tau.size()));
    p.beta = json_to_cvec(j.at("beta"));
    if (p.tau.size() != p.phi.size() || p.beta.size() != p.phi.size())
        throw std::runtime_error("inconsistent path field lengths");
    return p;
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    json j;
    in >> j;
    return j;
}

void dump_json(const json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << j.dump(2) << '\n';
}
}  // namespace

void save_scene(const Scene& scene, const std::string& path) {
    json j;
    j["format"] = "beamsquint-scene-v1";
    j["config"] = cfg_to_json(scene.cfg);
    j["truth"] = paths_to_json(scene.truth);
    j["observation"] = {{"Y", cmat_to_json(scene.obs.Y)},
                        {"subcarriers", scene.obs.subcarriers},
                        {"pilot", cvec_to_json(scene.obs.pilot)},
                        {"snr_db", scene.obs.snr_db},
                        {"seed", scene.obs.seed}};
    dump_json(j, path);
}

Scene load_scene(const std::string& path) {
    const json j = load_json(path);
    if (j.value("format", "") != "beamsquint-scene-v1")
        throw std::runtime_error("not a scene file: " + path);
    Scene s;
    s.cfg = json_to_cfg(j.at("config"));
    s.truth = json_to_paths(j.at("truth"));
    const json& o = j.at("observation");
    s.obs.Y = json_to_cmat(o.at("Y"));
    s.obs.subcarriers = o.at("subcarriers").get<std::vector<int>>();
    s.obs.pilot = json_to_cvec(o.at("pilot"));
    s.obs.snr_db = o.at("snr_db").get<double>();
    s.obs.seed = o.at("seed").get<std::uint64_t>();
    return s;
}

void save_uplink_estimate(const UplinkEstimate& est, const SystemConfig& cfg,
                          const std::string& path) {
    json j;
    j["format"] = "beamsquint-uplink-estimate-v1";
    j["config"] = cfg_to_json(cfg);
    j["paths"] = paths_to_json(est.paths);
    j["H"] = cmat_to_json(est.H);
    j["doa_iterations"] = est.doa_iterations;
    j["delay_iterations"] = est.delay_iterations;
    dump_json(j, path);
}

UplinkEstimate load_uplink_estimate(const std::string& path, SystemConfig* cfg_out) {
    const json j = load_json(path);
    if (j.value("format", "") != "beamsquint-uplink-estimate-v1")
        throw std::runtime_error("not an uplink estimate file: " + path);
    const SystemConfig cfg = json_to_cfg(j.at("config"));
    if (cfg_out) *cfg_out = cfg;
    UplinkEstimate est;
    est.paths = json_to_paths(j.at("paths"));
    est.H = json_to_cmat(j.at("H"));
    est.doa_iterations = j.at("doa_iterations").get<int>();
    est.delay_iterations = j.at("delay_iterations").get<int>();
    return est;
}

}  // namespace bsq
