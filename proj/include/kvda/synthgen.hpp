#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "kvda/rng.hpp"
#include "kvda/segment.hpp"

namespace kvda {

/// Gesture class ids used by the generator and the 7-class label space.
enum Gesture : int {
    kApproach = 0,
    kGrasp = 1,
    kLift = 2,
    kTransfer = 3,
    kExchange = 4,
    kRelease = 5,
    kReturn = 6,
};

const char* gesture_name(int id);

/// Feature-space component of the simulator->real shift. The affine map and
/// bias are materialized deterministically from (seed, vis_dim), so the
/// config stays a small serializable value.
struct VisShift {
    bool active = false;
    double mix = 0.35;         // off-diagonal strength of the affine map
    double bias_scale = 0.25;  // bias magnitude
    double noise_sigma = 0.05;
    std::uint64_t seed = 0xA11CEULL;

    Eigen::MatrixXd affine(int vis_dim) const;
    Eigen::VectorXd bias(int vis_dim) const;
};

/// Parameterization of the simulator->real domain shift.
struct ShiftConfig {
    Eigen::Vector3d translation{0, 0, 0};
    double scale_factor = 1.0;   // inter-object distance scaling about the board center
    double tilt_angle = 0.0;     // board plane rotation, radians
    double kin_noise_sigma = 0.0;
    VisShift vis;

    bool is_identity() const;
    void validate() const;
};

/// Fixed documented shift presets: none, translation, scale, tilt, combined.
/// Throws on unknown names, listing the valid ones.
ShiftConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// One scripted motion primitive. Targets are end positions in canonical
/// (simulator) coordinates; arms ease from wherever the previous step left
/// them, so the script fully determines the trial geometry.
struct MotionStep {
    int gesture = kApproach;
    int duration = 8;  // frames, >= 2
    int arm = 0;       // primary arm: 0 left, 1 right
    Eigen::Vector3d target{0, 0, 0};
    double grip_target = 35.0;
    bool both_arms = false;  // exchange: the secondary arm converges too
    int arm2 = 1;
    Eigen::Vector3d target2{0, 0, 0};
    double grip2_target = 35.0;
    // Scene context used for object tracking and visual synthesis.
    Eigen::Vector3d peg_start{0, 0, 0};
    Eigen::Vector3d peg_target{0, 0, 0};
};

using GestureScript = std::vector<MotionStep>;

/// Peg-transfer cycles covering all seven gesture classes
/// (approach, grasp, lift, transfer, exchange, transfer, release, return).
GestureScript standard_script(Rng& rng, int cycles = 2);

struct SynthParams {
    int vis_dim = 32;
    std::uint64_t vision_seed = 0xC0FFEEULL;  // fixed scene->feature projection
};

/// Generates one trial from a script. The canonical trajectory depends only
/// on (script, seed); the real domain applies the shift map to the finished
/// simulator readings plus real-only noise, so null shifts reproduce the
/// simulator trial bit for bit.
std::vector<Segment> generate_trial(const GestureScript& script, int domain,
                                    const ShiftConfig& shift, std::uint64_t seed,
                                    const SynthParams& params = {});

/// Paired two-domain dataset: trial i uses the same script and seed in both
/// domains. Segment ids and frame indices are assigned per domain.
PairedDataset generate_dataset(const ShiftConfig& shift, int n_trials, std::uint64_t seed,
                               const SynthParams& params = {});

/// Writes sim/ and real/ table triples, per-domain segment indexes and a
/// manifest carrying the full shift config and a config hash.
void write_dataset(const std::string& dir, const PairedDataset& data,
                   const std::string& preset_name, const ShiftConfig& shift,
                   int n_trials, std::uint64_t seed, const SynthParams& params);

}  // namespace kvda
