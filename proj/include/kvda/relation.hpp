#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "kvda/params.hpp"
#include "kvda/rng.hpp"

namespace kvda {

enum class Mode { train, eval };

/// Per-modality temporal-relation encoder configuration.
struct EncoderConfig {
    int feature_dim = 14;
    int hidden_dim = 256;    // relation feature width
    int lstm_hidden = 0;     // 0 -> (hidden_dim + 1) / 2
    int max_scale = 10;      // S
    int subsets_per_scale = 3;  // k

    int lstm() const { return lstm_hidden > 0 ? lstm_hidden : (hidden_dim + 1) / 2; }
    void validate() const;
};

/// k strictly increasing index subsets of size `scale` from [0, T).
/// train: uniform random ordered subsets; eval: deterministic evenly
/// spaced subsets, identical across calls. When fewer than k distinct
/// subsets exist, all of them are returned. Throws when scale > T or
/// scale < 2.
std::vector<std::vector<int>> sample_scale_indices(int T, int scale, int k, Mode mode, Rng& rng);

/// Index subsets per active scale for one segment; fixing a plan freezes
/// all sampling so a forward pass becomes a deterministic function of the
/// parameters.
struct SegmentPlan {
    std::map<int, std::vector<std::vector<int>>> scale_subsets;
};

SegmentPlan make_segment_plan(int T, const EncoderConfig& cfg, Mode mode, Rng& rng);

/// Registers biLSTM + projection parameters under `prefix` and initializes
/// them uniform +-1/sqrt(fan_in).
void add_encoder_params(ParamStore& params, const std::string& prefix,
                        const EncoderConfig& cfg, Rng& rng);

/// Caches for one directional LSTM run (inputs gathered row per step).
struct LstmCache {
    Eigen::MatrixXd x;  // steps x in
    std::vector<Eigen::VectorXd> i, f, g, o, c, h;
};

struct SubsetCache {
    std::vector<int> idx;
    LstmCache fw, bw;
    Eigen::VectorXd u;  // concatenated final hidden states (2h)
    Eigen::VectorXd r;  // projected relation feature (hidden_dim)
};

struct ScaleCache {
    int scale = 0;
    std::vector<SubsetCache> subsets;
    Eigen::VectorXd feature;  // mean over subsets
};

/// Multi-scale encoder output for one segment.
struct EncoderOut {
    std::map<int, ScaleCache> scales;
    Eigen::VectorXd pooled;  // mean over active scales (the encoder feature)
};

/// Gradient sink mirroring EncoderOut: upstream gradients per scale
/// feature plus one for the pooled feature.
struct EncoderGrad {
    std::map<int, Eigen::VectorXd> scale_feature;
    Eigen::VectorXd pooled;
};

/// Runs the shared biLSTM over one index subset and projects the
/// concatenated final hidden states to hidden_dim.
SubsetCache encode_subset(const ParamStore& params, const std::string& prefix,
                          const EncoderConfig& cfg, const Eigen::MatrixXd& frames,
                          const std::vector<int>& idx);

/// Relation feature at one scale: subset features averaged. This is the
/// spec-level encode_relation operation.
Eigen::VectorXd encode_relation(const Eigen::MatrixXd& frames,
                                const std::vector<std::vector<int>>& subsets,
                                const ParamStore& params, const std::string& prefix,
                                const EncoderConfig& cfg);

/// Features for every scale s in 2..min(S, T); scales with s > T are
/// skipped. Throws when T < 2.
EncoderOut encode_all_scales(const ParamStore& params, const std::string& prefix,
                             const EncoderConfig& cfg, const Eigen::MatrixXd& frames,
                             const SegmentPlan& plan);

/// Backpropagates EncoderGrad through the cached forward pass,
/// accumulating parameter gradients into `grads`.
void encoder_backward(const ParamStore& params, const std::string& prefix,
                      const EncoderConfig& cfg, const EncoderOut& out,
                      const EncoderGrad& upstream, ParamStore& grads);

}  // namespace kvda
