// SPDX-License-Identifier: Apache-2.0
//
// beamsquint: wideband massive MIMO-OFDM channel estimation under beam squint
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef BSQ_DICT_HPP
#define BSQ_DICT_HPP

#include <memory>
#include <stdexcept>
#include <vector>

#include "bsq/model.hpp"

namespace bsq {

/// Structure tag a family can declare so solves avoid materializing the full
/// sensing matrix. Either fast path agrees with the dense definition to 1e-12.
enum class DictStructure {
    Dense,         // no special structure; atoms materialized
    SlotDiagonal,  // atom column q is supported on rows {m*T + q}; per-slot profile
    KronIdentity,  // atom = kernel(p) (x) I_B
};

/// A parametric block dictionary: one scalar parameter per block, atoms of
/// fixed size measurement_dim() x block_dim(), differentiable in the parameter.
class DictionaryFamily {
  public:
    virtual ~DictionaryFamily() = default;

    virtual int measurement_dim() const = 0;
    virtual int block_dim() const = 0;
    virtual DictStructure structure() const { return DictStructure::Dense; }

    /// Dense atom (the definitional contract; fast paths must match it).
    virtual Eigen::MatrixXcd atom(double param) const = 0;
    virtual Eigen::MatrixXcd atom_derivative(double param) const = 0;

    /// Uniform initial grid of L parameters.
    virtual std::vector<double> initial_grid(int L) const = 0;

    /// Maps a parameter back into the physical domain (wrap/clamp).
    virtual double canonicalize(double param) const { return param; }

    /// Distance between two parameters (wrap-aware where applicable).
    virtual double distance(double a, double b) const { return std::abs(a - b); }

    /// Parameters closer than this are considered duplicates and merged.
    virtual double merge_tolerance() const = 0;

    /// Typical spacing of the initial grid at the given L; used to scale the
    /// first trial step of the grid refinement line search.
    virtual double grid_scale(int L) const = 0;

    // SlotDiagonal hook: M x T profile, column q = per-slot steering vector.
    virtual Eigen::MatrixXcd profile(double) const { throw std::logic_error("no profile"); }
    virtual Eigen::MatrixXcd profile_derivative(double) const { throw std::logic_error("no profile"); }

    // KronIdentity hook: kernel vector of length measurement_dim()/block_dim().
    virtual Eigen::VectorXcd kernel(double) const { throw std::logic_error("no kernel"); }
    virtual Eigen::VectorXcd kernel_derivative(double) const { throw std::logic_error("no kernel"); }
};

/// DOA-domain family: block i is the MT x T matrix [a(phi_i,0) (x) I_T]
/// elementwise-multiplied by the stacked frequency rotation matrices. With
/// bse=false the rotations collapse to the identity (narrowband dictionary).
class DoaDictionaryFamily final : public DictionaryFamily {
  public:
    DoaDictionaryFamily(const SystemConfig& cfg, std::vector<int> subcarriers, bool bse = true,
                        Carrier carrier = Carrier::Uplink);

    int measurement_dim() const override { return cfg_.M * static_cast<int>(sub_.size()); }
    int block_dim() const override { return static_cast<int>(sub_.size()); }
    DictStructure structure() const override { return DictStructure::SlotDiagonal; }

    Eigen::MatrixXcd atom(double phi) const override;
    Eigen::MatrixXcd atom_derivative(double phi) const override;
    std::vector<double> initial_grid(int L) const override;
    double canonicalize(double phi) const override;
    double distance(double a, double b) const override;
    double merge_tolerance() const override { return 1e-4; }
    double grid_scale(int L) const override;

    Eigen::MatrixXcd profile(double phi) const override;
    Eigen::MatrixXcd profile_derivative(double phi) const override;

    const std::vector<int>& subcarriers() const { return sub_; }
    const SystemConfig& config() const { return cfg_; }
    bool bse() const { return bse_; }

  private:
    SystemConfig cfg_;
    std::vector<int> sub_;
    bool bse_;
    Carrier carrier_;
};

/// Delay-domain family: block i is b_restricted(tau_i) (x) I_M where
/// b_restricted collects the delay phases at the pilot subcarriers.
class DelayDictionaryFamily final : public DictionaryFamily {
  public:
    DelayDictionaryFamily(const SystemConfig& cfg, std::vector<int> subcarriers);

    int measurement_dim() const override { return cfg_.M * static_cast<int>(sub_.size()); }
    int block_dim() const override { return cfg_.M; }
    DictStructure structure() const override { return DictStructure::KronIdentity; }

    Eigen::MatrixXcd atom(double tau) const override;
    Eigen::MatrixXcd atom_derivative(double tau) const override;
    std::vector<double> initial_grid(int L) const override;
    double canonicalize(double tau) const override;
    double merge_tolerance() const override { return 1e-4 / (cfg_.N * cfg_.f0); }
    double grid_scale(int L) const override;

    Eigen::VectorXcd kernel(double tau) const override;
    Eigen::VectorXcd kernel_derivative(double tau) const override;

    const std::vector<int>& subcarriers() const { return sub_; }
    const SystemConfig& config() const { return cfg_; }

  private:
    SystemConfig cfg_;
    std::vector<int> sub_;
};

/// Frequency rotation matrix Phi_m: T x T diagonal with q-th entry
/// exp(-j*m*(n_q*f0/fc)*phi).
Eigen::MatrixXcd rotation_matrix(double phi, int m, const std::vector<int>& subcarriers,
                                 const SystemConfig& cfg);

/// MT x T dictionary atom for a single angle (materialized).
Eigen::MatrixXcd doa_atom(double phi, const std::vector<int>& subcarriers, const SystemConfig& cfg);

/// Materialized sensing matrix for a grid (MT x L*B).
Eigen::MatrixXcd materialize(const DictionaryFamily& family, const std::vector<double>& grid);

/// Materialized DOA dictionary over an angle grid (MT x L*T).
Eigen::MatrixXcd doa_dictionary(const std::vector<double>& grid, const std::vector<int>& subcarriers,
                                const SystemConfig& cfg);

/// Materialized delay dictionary over a delay grid (MT x L*M).
Eigen::MatrixXcd delay_dictionary(const std::vector<double>& grid, const std::vector<int>& subcarriers,
                                  const SystemConfig& cfg);

}  // namespace bsq

#endif  // BSQ_DICT_HPP
