#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace kvda {

constexpr int kNumGestures = 7;
constexpr int kKinDim = 14;  // 7 values per arm: position(3), yaw/pitch/roll(3), gripper(1)

constexpr int kDomainSimulator = 0;
constexpr int kDomainReal = 1;

/// One arm's raw pose sample: position in robot-base coordinates,
/// wrist orientation in radians, gripper on the raw 30-100 scale.
struct ArmFrame {
    Eigen::Vector3d position{0, 0, 0};
    double yaw = 0, pitch = 0, roll = 0;
    double gripper = 30.0;
};

struct KinematicFrame {
    ArmFrame left, right;

    /// Flattens to the canonical 14-value layout (left arm first).
    Eigen::Matrix<double, kKinDim, 1> flat() const;
    static KinematicFrame from_flat(const Eigen::Matrix<double, kKinDim, 1>& v);
};

using VisualFeature = Eigen::VectorXd;

/// A maximal run of consecutive frames sharing one gesture label.
/// The sample unit for training and evaluation.
struct Segment {
    int id = -1;
    int trial_id = 0;
    int first_frame = 0;
    int gesture = -1;  // -1 = unlabeled
    int domain = kDomainSimulator;
    std::vector<KinematicFrame> kin;
    std::vector<VisualFeature> vis;

    int length() const { return static_cast<int>(kin.size()); }
    int last_frame() const { return first_frame + length() - 1; }
};

struct Dataset {
    std::vector<Segment> segments;
    int vis_dim = 0;
};

/// Paired simulator/real datasets loaded from one dataset directory.
struct PairedDataset {
    Dataset sim, real;
};

/// Trial-level k-fold partition. Fold f tests the trials in
/// test_trials[f] and trains on all others.
struct DatasetSplit {
    int folds = 0;
    std::vector<std::vector<int>> test_trials;

    bool is_test_trial(int fold, int trial_id) const;
};

/// Builds segments from three aligned per-frame tables. Rows are grouped
/// by trial, segments are maximal runs of identical gesture label in
/// frame order. Single-frame runs are dropped with a warning on stderr.
/// Throws on modality misalignment or unknown gesture ids.
Dataset load_trials(const std::string& kinematics_csv,
                    const std::string& features_csv,
                    const std::string& labels_csv,
                    int domain);

/// Loads `dir/sim` and `dir/real`, each holding kinematics.csv,
/// features.csv and labels.csv.
PairedDataset load_dataset_dir(const std::string& dir);

/// Deterministic trial-level partition into k folds.
/// Throws when there are fewer distinct trials than folds.
DatasetSplit make_folds(const std::vector<Segment>& segments, int k, std::uint64_t seed);

std::vector<int> trial_ids(const std::vector<Segment>& segments);

/// Draws n segment indices per pool, without replacement when the pool is
/// large enough, otherwise with replacement. Pure function of (seed, step).
std::pair<std::vector<int>, std::vector<int>>
sample_batch(const std::vector<int>& source_pool, const std::vector<int>& target_pool,
             int n_per_domain, std::uint64_t seed, std::uint64_t step);

/// Writes the segment index (id, trial, frame range, label, domain) as JSON.
void write_segment_index(const std::vector<Segment>& segments, const std::string& path);

}  // namespace kvda
