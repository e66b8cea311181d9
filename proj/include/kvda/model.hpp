#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "kvda/fusion.hpp"
#include "kvda/params.hpp"
#include "kvda/relation.hpp"
#include "kvda/segment.hpp"

namespace kvda {

/// Experiment method, matching the CLI flag values.
enum class Method { baseline_position, baseline_direction, mdok, mdok_kvatt };

Method method_from_string(const std::string& s);
std::string to_string(Method m);

/// Identity forward, gradient scaled by -beta on the way back. Placed
/// between an encoder feature and its domain discriminator.
struct GradientReversal {
    double beta = 0.5;
    Eigen::VectorXd forward(const Eigen::VectorXd& x) const { return x; }
    Eigen::VectorXd backward(const Eigen::VectorXd& g) const { return -beta * g; }
};

struct ModelConfig {
    Method method = Method::mdok_kvatt;
    int kin_dim = kKinDim;
    int vis_dim = 0;  // required when the method uses the visual branch
    int hidden_dim = 256;
    int lstm_hidden = 0;  // 0 -> (hidden_dim + 1) / 2
    int max_scale = 10;
    int subsets_per_scale = 3;
    int fusion_dim = 256;
    FusionMode fusion_mode = FusionMode::elementwise;
    int head_hidden = 128;
    int n_classes = kNumGestures;
    double lambda = 0.8;
    double grl_beta = 0.5;

    bool use_visual() const { return method == Method::mdok_kvatt; }
    bool use_kd() const { return method == Method::mdok || method == Method::mdok_kvatt; }
    bool use_kvd() const { return method == Method::mdok_kvatt; }
    bool position_input() const { return method == Method::baseline_position; }

    EncoderConfig kin_encoder() const;
    EncoderConfig vis_encoder() const;
    FusionConfig fusion() const;
    void validate() const;
};

/// Per-segment model input: rows are frames. Kinematics are motion-direction
/// frames (or raw-position frames for the position baseline), visuals the
/// aligned precomputed features.
struct SegmentInput {
    Eigen::MatrixXd kin;
    Eigen::MatrixXd vis;
    int label = -1;
    int domain = kDomainSimulator;
    int id = -1;

    int frames() const { return static_cast<int>(kin.rows()); }
};

SegmentInput prepare_input(const Segment& segment, const ModelConfig& cfg);
std::vector<SegmentInput> prepare_inputs(const std::vector<Segment>& segments,
                                         const ModelConfig& cfg);

using Plan = std::vector<SegmentPlan>;

struct HeadCache {
    bool active = false;
    Eigen::VectorXd input, hidden, logits, probs;
};

struct SegmentForward {
    EncoderOut kin, vis;
    std::map<int, Eigen::VectorXd> fused_per_scale;
    Eigen::VectorXd f_k;    // pooled kinematic feature
    Eigen::VectorXd f_kvr;  // multi-scale co-occurrence feature
    HeadCache kc, kvc, kd, kvd;
};

/// Which loss terms participate; grl_enabled=false passes discriminator
/// gradients through unreversed (used by the GRL contract check).
struct LossMask {
    bool classification = true;
    bool kd = true;
    bool kvd = true;
    bool grl_enabled = true;
};

struct LossValues {
    double total = 0;
    double classification = 0;
    double kd = 0;
    double kvd = 0;
    int source_correct = 0;
    int source_total = 0;
};

class Model {
public:
    ModelConfig cfg;
    ParamStore params;

    /// Deterministic uniform +-1/sqrt(fan_in) initialization.
    static Model init(const ModelConfig& cfg, std::uint64_t seed);

    Plan make_plan(const std::vector<SegmentInput>& batch, Mode mode, Rng& rng) const;
    Plan make_eval_plan(const std::vector<SegmentInput>& batch) const;

    SegmentForward forward_segment(const SegmentInput& input, const SegmentPlan& plan) const;

    /// Mean domain cross-entropy of KD over a mixed-domain batch.
    double kd_loss(const std::vector<SegmentInput>& batch, const Plan& plan) const;
    /// Mean domain cross-entropy of KVD over a mixed-domain batch.
    double kvd_loss(const std::vector<SegmentInput>& batch, const Plan& plan) const;
    /// Mean gesture cross-entropy of the lambda-mixed prediction over a
    /// labeled source batch.
    double classification_loss(const std::vector<SegmentInput>& batch, const Plan& plan) const;

    LossValues total_loss(const std::vector<SegmentInput>& source,
                          const std::vector<SegmentInput>& target, const Plan& source_plan,
                          const Plan& target_plan) const;

    /// Forward plus backward. `grads` must be zeros_like(params) on entry.
    /// Work is partitioned into `n_chunks` fixed chunks reduced in order,
    /// so results are bitwise reproducible for any thread count.
    LossValues losses_with_grad(const std::vector<SegmentInput>& source,
                                const std::vector<SegmentInput>& target,
                                const Plan& source_plan, const Plan& target_plan,
                                ParamStore& grads, const LossMask& mask = {},
                                int n_chunks = 8) const;

    /// p^c = lambda p^kc + (1 - lambda) p^kvc (p^kc alone for
    /// kinematic-only methods).
    Eigen::VectorXd class_probs(const SegmentInput& input, const SegmentPlan& plan) const;
    Eigen::VectorXd kc_probs(const SegmentInput& input, const SegmentPlan& plan) const;
    Eigen::VectorXd kvc_probs(const SegmentInput& input, const SegmentPlan& plan) const;
    Eigen::VectorXd kd_probs(const SegmentInput& input, const SegmentPlan& plan) const;
    Eigen::VectorXd kvd_probs(const SegmentInput& input, const SegmentPlan& plan) const;
    int predict(const SegmentInput& input, const SegmentPlan& plan) const;

    std::vector<int> predict_batch(const std::vector<SegmentInput>& batch) const;
};

/// Self-describing JSON checkpoint keyed by parameter name with shape
/// metadata. `extra` is merged into the top-level object.
void save_checkpoint(const Model& model, const std::string& path,
                     const std::map<std::string, std::string>& extra = {});
Model load_checkpoint(const std::string& path);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& js);

}  // namespace kvda
