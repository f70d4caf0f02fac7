// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef BSQ_DOWNLINK_HPP
#define BSQ_DOWNLINK_HPP

#include <cstdint>
#include <string>

#include "bsq/reconstruct.hpp"

namespace bsq {

/// BS-side downlink estimate. The user feeds back exactly P complex gains;
/// the BS rebuilds the channel from those plus the uplink-derived parameters.
struct DownlinkEstimate {
    Eigen::VectorXcd beta_dl;     // fed-back gain estimates, length P
    Eigen::MatrixXcd H_dl;        // M x N downlink reconstruction
    PathSet paths_dl;             // reciprocal parameters with estimated gains
};

/// Options controlling the reciprocity convention.
struct DownlinkOptions {
    /// true (default): physical angle is carrier-invariant, so the normalized
    /// angle rescales as phi_dl = phi_ul * fc_dl / fc_ul (antenna spacing is
    /// fixed in meters). false: carry the normalized value over unchanged.
    bool rescale_normalized_angle = true;
};

/// Maps uplink path parameters to downlink ones: delays and path count carry
/// over; the normalized angle rescales with the carrier ratio (see options).
PathSet reciprocal_params(const PathSet& uplink_paths, const SystemConfig& cfg,
                          const DownlinkOptions& opts = {});

/// MT x P beamforming matrix: column p = (1/(MT)) vec of the downlink path
/// signature restricted to the pilot subcarriers.
Eigen::MatrixXcd beamforming_matrix(const PathSet& paths_dl, const SystemConfig& cfg,
                                    const std::vector<int>& subcarriers);

/// P x T pilot matrix with orthonormal rows (scaled DFT rows). Requires P <= T.
Eigen::MatrixXcd downlink_pilots(int P, int T);

/// Simulates the user's received downlink pilot row (length T) through the
/// true downlink channel: y = h^H F S + e, noise variance 10^(-snr/10).
Eigen::VectorXcd observe_downlink(const PathSet& true_dl_paths, const Eigen::MatrixXcd& F,
                                  const Eigen::MatrixXcd& S_dl, const std::vector<int>& subcarriers,
                                  double snr_db, std::mt19937_64& rng, const SystemConfig& cfg);

/// LS gain recovery: beta^H = y * pinv(S); with orthonormal rows pinv(S) = S^H.
Eigen::VectorXcd estimate_downlink_gains(const Eigen::VectorXcd& y_dl, const Eigen::MatrixXcd& S_dl);

/// Full BS-side pipeline: reciprocity -> beamforming -> pilots -> user
/// observation -> gain LS -> reconstruction.
DownlinkEstimate estimate_downlink(const UplinkEstimate& uplink, const PathSet& true_dl,
                                   double snr_db, std::mt19937_64& rng, const SystemConfig& cfg,
                                   const DownlinkOptions& opts = {});

/// Serializes the feedback gains as P pairs of little-endian IEEE-754 doubles
/// (real then imaginary), and parses them back.
std::string serialize_feedback(const Eigen::VectorXcd& beta_dl);
Eigen::VectorXcd parse_feedback(const std::string& payload);

}  // namespace bsq

#endif  // BSQ_DOWNLINK_HPP
