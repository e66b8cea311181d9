#pragma once

#include <Eigen/Core>
#include <map>
#include <string>

#include "kvda/params.hpp"

namespace kvda {

/// How the per-scale kinematic/visual co-occurrence vector is formed.
/// elementwise: Rv ⊙ Rk. scalar_attention: the normalized dot product
/// <Rv, Rk>/dim scales the concatenation [Rv; Rk].
enum class FusionMode { elementwise, scalar_attention };

FusionMode fusion_mode_from_string(const std::string& s);
std::string to_string(FusionMode m);

struct FusionConfig {
    FusionMode mode = FusionMode::elementwise;
    int input_dim = 256;   // relation feature width per modality
    int common_dim = 256;  // F, the fused feature width
    int min_scale = 2;
    int max_scale = 10;

    int scale_input_dim() const {
        return mode == FusionMode::elementwise ? input_dim : 2 * input_dim;
    }
    void validate() const;
};

/// Co-occurrence vector for one scale.
Eigen::VectorXd kv_relation_scale(const Eigen::VectorXd& rv, const Eigen::VectorXd& rk,
                                  FusionMode mode);

/// Backward of kv_relation_scale: accumulates d(rv), d(rk) given the
/// upstream gradient on the output.
void kv_relation_scale_backward(const Eigen::VectorXd& rv, const Eigen::VectorXd& rk,
                                FusionMode mode, const Eigen::VectorXd& d_out,
                                Eigen::VectorXd& d_rv, Eigen::VectorXd& d_rk);

/// Registers one affine projection q^s per scale in [min_scale, max_scale].
void add_fusion_params(ParamStore& params, const FusionConfig& cfg, Rng& rng);

/// F_kvr = sum_s q^s(per_scale[s]). Throws when a present scale has no
/// registered projection.
Eigen::VectorXd multi_scale_fuse(const std::map<int, Eigen::VectorXd>& per_scale,
                                 const ParamStore& params, const FusionConfig& cfg);

/// Backward of multi_scale_fuse: accumulates projection gradients and
/// returns the gradient on each scale's fused vector.
std::map<int, Eigen::VectorXd> multi_scale_fuse_backward(
    const std::map<int, Eigen::VectorXd>& per_scale, const ParamStore& params,
    const FusionConfig& cfg, const Eigen::VectorXd& d_out, ParamStore& grads);

}  // namespace kvda
