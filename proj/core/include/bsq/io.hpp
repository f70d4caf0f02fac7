// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef BSQ_IO_HPP
#define BSQ_IO_HPP

#include <string>

#include "bsq/reconstruct.hpp"

namespace bsq {

/// One simulated scene: the system geometry, the true paths, and a noisy
/// pilot observation of user 0. Serialized as JSON (schema in README).
struct Scene {
    SystemConfig cfg;
    PathSet truth;
    Observation obs;
};

void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

/// Structured result file for an uplink estimate (JSON; schema in README).
void save_uplink_estimate(const UplinkEstimate& est, const SystemConfig& cfg,
                          const std::string& path);
UplinkEstimate load_uplink_estimate(const std::string& path, SystemConfig* cfg_out = nullptr);

}  // namespace bsq

#endif  // BSQ_IO_HPP
