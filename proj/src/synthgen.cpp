#include "kvda/synthgen.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "kvda/mdok.hpp"

namespace kvda {

namespace {

// Canonical scene geometry (length units, board center at the origin).
const Eigen::Vector3d kHomeLeft{-0.26, 0.02, 0.16};
const Eigen::Vector3d kHomeRight{0.26, -0.02, 0.16};
const Eigen::Vector3d kExchangePoint{0.0, 0.0, 0.12};
constexpr double kPegColumnX = 0.15;
constexpr double kPegTopZ = 0.02;
constexpr double kGripOpen = 35.0;
constexpr double kGripClosed = 92.0;

constexpr double kTremorAmp = 0.0015;
constexpr double kPosSensorSigma = 0.0008;
constexpr double kOrientSigma = 0.005;
constexpr double kGripSigma = 0.4;
constexpr double kVisFeatureSigma = 0.01;

double ease(double u) { return u * u * (3.0 - 2.0 * u); }

Eigen::Matrix3d tilt_rotation(double angle) {
    Eigen::Matrix3d r;
    const double c = std::cos(angle), s = std::sin(angle);
    r << 1, 0, 0,
         0, c, -s,
         0, s, c;
    return r;
}

}  // namespace

const char* gesture_name(int id) {
    static const char* names[kNumGestures] = {"approach", "grasp",   "lift",  "transfer",
                                              "exchange", "release", "return"};
    if (id < 0 || id >= kNumGestures) throw std::invalid_argument("invalid gesture id");
    return names[id];
}

Eigen::MatrixXd VisShift::affine(int vis_dim) const {
    Rng rng(mix64(seed, 0xAFF1EULL));
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(vis_dim, vis_dim);
    const double s = mix / std::sqrt(static_cast<double>(vis_dim));
    for (int i = 0; i < vis_dim; ++i)
        for (int j = 0; j < vis_dim; ++j) a(i, j) += s * rng.normal();
    return a;
}

Eigen::VectorXd VisShift::bias(int vis_dim) const {
    Rng rng(mix64(seed, 0xB1A5ULL));
    Eigen::VectorXd b(vis_dim);
    for (int i = 0; i < vis_dim; ++i) b[i] = bias_scale * rng.normal();
    return b;
}

bool ShiftConfig::is_identity() const {
    return translation.isZero() && scale_factor == 1.0 && tilt_angle == 0.0 &&
           kin_noise_sigma == 0.0 && !vis.active;
}

void ShiftConfig::validate() const {
    if (scale_factor <= 0.0) throw std::invalid_argument("shift: scale_factor must be > 0");
    if (kin_noise_sigma < 0.0) throw std::invalid_argument("shift: kin_noise_sigma must be >= 0");
    if (vis.noise_sigma < 0.0) throw std::invalid_argument("shift: vis noise sigma must be >= 0");
}

ShiftConfig preset(const std::string& name) {
    ShiftConfig c;
    if (name == "none") return c;
    if (name == "translation") {
        c.translation = {0.2, -0.1, 0.05};
        return c;
    }
    if (name == "scale") {
        c.scale_factor = 1.3;
        return c;
    }
    if (name == "tilt") {
        c.tilt_angle = 0.15;
        return c;
    }
    if (name == "combined") {
        c.translation = {0.2, -0.1, 0.05};
        c.scale_factor = 1.3;
        c.tilt_angle = 0.15;
        c.kin_noise_sigma = 0.002;
        c.vis.active = true;
        return c;
    }
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown preset '" + name + "' (known: " + known + ")");
}

std::vector<std::string> preset_names() {
    return {"none", "translation", "scale", "tilt", "combined"};
}

GestureScript standard_script(Rng& rng, int cycles) {
    if (cycles < 1) throw std::invalid_argument("standard_script: cycles must be >= 1");
    GestureScript script;
    auto dur = [&] { return rng.uniform_int(6, 11); };
    auto jit = [&](double s) {
        return Eigen::Vector3d(rng.normal(0, s), rng.normal(0, s), rng.normal(0, s * 0.4));
    };
    const double slots[3] = {-0.1, 0.0, 0.1};

    for (int c = 0; c < cycles; ++c) {
        const int pick = c % 2;  // alternate transfer direction
        const int recv = 1 - pick;
        const double pick_x = pick == 0 ? -kPegColumnX : kPegColumnX;
        const Eigen::Vector3d peg_start =
            Eigen::Vector3d(pick_x, slots[rng.uniform_int(0, 2)], kPegTopZ) + jit(0.012);
        const Eigen::Vector3d peg_target =
            Eigen::Vector3d(-pick_x, slots[rng.uniform_int(0, 2)], kPegTopZ) + jit(0.012);
        const Eigen::Vector3d exch = kExchangePoint + jit(0.01);
        const Eigen::Vector3d pick_side = exch + Eigen::Vector3d(pick == 0 ? -0.012 : 0.012, 0, 0);
        const Eigen::Vector3d recv_side = exch + Eigen::Vector3d(recv == 0 ? -0.012 : 0.012, 0, 0);

        auto step = [&](int gesture, int arm, const Eigen::Vector3d& target, double grip) {
            MotionStep s;
            s.gesture = gesture;
            s.duration = dur();
            s.arm = arm;
            s.target = target;
            s.grip_target = grip;
            s.peg_start = peg_start;
            s.peg_target = peg_target;
            return s;
        };

        script.push_back(step(kApproach, pick, peg_start + Eigen::Vector3d(0, 0, 0.014), kGripOpen));
        script.push_back(step(kGrasp, pick, peg_start + Eigen::Vector3d(0, 0, 0.014) + jit(0.002),
                              kGripClosed));
        script.push_back(step(kLift, pick, peg_start + Eigen::Vector3d(0, 0, 0.115), kGripClosed));
        script.push_back(step(kTransfer, pick, pick_side, kGripClosed));

        MotionStep ex = step(kExchange, recv, recv_side, kGripClosed);
        ex.both_arms = true;
        ex.arm2 = pick;
        ex.target2 = pick_side + jit(0.002);
        ex.grip2_target = kGripOpen;
        script.push_back(ex);

        script.push_back(step(kTransfer, recv, peg_target + Eigen::Vector3d(0, 0, 0.065),
                              kGripClosed));
        script.push_back(step(kRelease, recv, peg_target + Eigen::Vector3d(0, 0, 0.030), kGripOpen));
        script.push_back(step(kReturn, recv, (recv == 0 ? kHomeLeft : kHomeRight) + jit(0.01),
                              kGripOpen));
    }
    return script;
}

namespace {

struct TrialFrames {
    std::vector<KinematicFrame> kin;           // simulator readings
    std::vector<Eigen::VectorXd> scene_state;  // 16-d visual scene state
    std::vector<int> label;
    std::vector<int> segment_start;  // index of first frame per segment
};

constexpr int kSceneStateDim = 17;

Eigen::VectorXd make_scene_state(const Eigen::Vector3d& pl, const Eigen::Vector3d& pr,
                                 double gl, double gr, const Eigen::Vector3d& obj,
                                 const Eigen::Vector3d& peg_start,
                                 const Eigen::Vector3d& peg_target) {
    Eigen::VectorXd s(kSceneStateDim);
    s << pl, pr, normalize_gripper(gl), normalize_gripper(gr), obj, peg_start, peg_target;
    return s;
}

TrialFrames run_script(const GestureScript& script, std::uint64_t seed) {
    Rng rng(mix64(seed, 0x7121A1ULL));

    Eigen::Vector3d pos[2] = {kHomeLeft, kHomeRight};
    double grip[2] = {kGripOpen, kGripOpen};
    double yaw0[2], pitch0[2], roll0[2];
    for (int a = 0; a < 2; ++a) {
        yaw0[a] = (a == 0 ? 0.3 : -0.3) + rng.normal(0, 0.05);
        pitch0[a] = -0.6 + rng.normal(0, 0.05);
        roll0[a] = (a == 0 ? 0.1 : -0.1) + rng.normal(0, 0.05);
    }
    // Two-sinusoid tremor per arm and axis.
    double tr_amp[2][3][2], tr_freq[2][3][2], tr_phase[2][3][2];
    for (int a = 0; a < 2; ++a)
        for (int ax = 0; ax < 3; ++ax)
            for (int m = 0; m < 2; ++m) {
                tr_amp[a][ax][m] = kTremorAmp * rng.uniform(0.5, 1.0);
                tr_freq[a][ax][m] = rng.uniform(0.25, 1.2);
                tr_phase[a][ax][m] = rng.uniform(0.0, 6.2831853);
            }
    auto tremor = [&](int arm, int t) {
        Eigen::Vector3d v;
        for (int ax = 0; ax < 3; ++ax) {
            double s = 0;
            for (int m = 0; m < 2; ++m)
                s += tr_amp[arm][ax][m] * std::sin(tr_freq[arm][ax][m] * t + tr_phase[arm][ax][m]);
            v[ax] = s;
        }
        return v;
    };

    TrialFrames out;
    int t_global = 0;
    for (const auto& step : script) {
        if (step.gesture < 0 || step.gesture >= kNumGestures)
            throw std::invalid_argument("generate_trial: invalid gesture id " +
                                        std::to_string(step.gesture));
        if (step.duration < 2)
            throw std::invalid_argument("generate_trial: step duration must be >= 2");
        out.segment_start.push_back(static_cast<int>(out.kin.size()));

        const Eigen::Vector3d from = pos[step.arm];
        const double grip_from = grip[step.arm];
        const Eigen::Vector3d from2 = step.both_arms ? pos[step.arm2] : Eigen::Vector3d::Zero();
        const double grip2_from = step.both_arms ? grip[step.arm2] : 0.0;

        for (int t = 1; t <= step.duration; ++t) {
            const double u = ease(static_cast<double>(t) / step.duration);
            Eigen::Vector3d true_pos[2] = {pos[0], pos[1]};
            double true_grip[2] = {grip[0], grip[1]};
            true_pos[step.arm] = from + u * (step.target - from);
            true_grip[step.arm] = grip_from + u * (step.grip_target - grip_from);
            if (step.both_arms) {
                true_pos[step.arm2] = from2 + u * (step.target2 - from2);
                true_grip[step.arm2] = grip2_from + u * (step.grip2_target - grip2_from);
            }

            // Object tracking for the visual scene.
            Eigen::Vector3d obj;
            const Eigen::Vector3d held_offset(0, 0, -0.012);
            switch (step.gesture) {
                case kApproach:
                case kGrasp:
                    obj = step.peg_start;
                    break;
                case kLift:
                case kTransfer:
                    obj = true_pos[step.arm] + held_offset;
                    break;
                case kExchange:
                    obj = (u < 0.5 ? true_pos[step.arm2] : true_pos[step.arm]) + held_offset;
                    break;
                case kRelease:
                    obj = u < 0.6 ? true_pos[step.arm] + held_offset : step.peg_target;
                    break;
                default:
                    obj = step.peg_target;
                    break;
            }

            KinematicFrame kf;
            ArmFrame* arms[2] = {&kf.left, &kf.right};
            Eigen::Vector3d noisy_pos[2];
            for (int a = 0; a < 2; ++a) {
                noisy_pos[a] = true_pos[a] + tremor(a, t_global);
                for (int ax = 0; ax < 3; ++ax) noisy_pos[a][ax] += rng.normal(0, kPosSensorSigma);
                arms[a]->position = noisy_pos[a];
                arms[a]->yaw = yaw0[a] + 0.05 * std::sin(0.17 * t_global + a) +
                               rng.normal(0, kOrientSigma);
                arms[a]->pitch = pitch0[a] + 0.05 * std::sin(0.11 * t_global + 2 + a) +
                                 rng.normal(0, kOrientSigma);
                arms[a]->roll = roll0[a] + 0.05 * std::sin(0.13 * t_global + 4 + a) +
                                rng.normal(0, kOrientSigma);
                arms[a]->gripper = std::clamp(true_grip[a] + rng.normal(0, kGripSigma), 30.0, 100.0);
            }
            out.kin.push_back(kf);
            out.scene_state.push_back(make_scene_state(noisy_pos[0], noisy_pos[1],
                                                       arms[0]->gripper, arms[1]->gripper, obj,
                                                       step.peg_start, step.peg_target));
            out.label.push_back(step.gesture);
            ++t_global;
        }

        pos[step.arm] = step.target;
        grip[step.arm] = step.grip_target;
        if (step.both_arms) {
            pos[step.arm2] = step.target2;
            grip[step.arm2] = step.grip2_target;
        }
    }
    return out;
}

Eigen::MatrixXd vision_projection(const SynthParams& params) {
    Rng rng(mix64(params.vision_seed, 0x5CE2EULL));
    Eigen::MatrixXd w(params.vis_dim, kSceneStateDim);
    const double s = 1.0 / std::sqrt(static_cast<double>(kSceneStateDim));
    for (int i = 0; i < params.vis_dim; ++i)
        for (int j = 0; j < kSceneStateDim; ++j) w(i, j) = s * rng.normal();
    return w;
}

Eigen::VectorXd vision_bias(const SynthParams& params) {
    Rng rng(mix64(params.vision_seed, 0x5B1A5ULL));
    Eigen::VectorXd b(params.vis_dim);
    for (int i = 0; i < params.vis_dim; ++i) b[i] = 0.1 * rng.normal();
    return b;
}

}  // namespace

std::vector<Segment> generate_trial(const GestureScript& script, int domain,
                                    const ShiftConfig& shift, std::uint64_t seed,
                                    const SynthParams& params) {
    shift.validate();
    if (domain != kDomainSimulator && domain != kDomainReal)
        throw std::invalid_argument("generate_trial: domain must be 0 or 1");

    TrialFrames frames = run_script(script, seed);
    const int n = static_cast<int>(frames.kin.size());

    if (domain == kDomainReal && !shift.is_identity()) {
        const Eigen::Matrix3d rot = tilt_rotation(shift.tilt_angle);
        const auto map_pos = [&](const Eigen::Vector3d& p) -> Eigen::Vector3d {
            return shift.translation + shift.scale_factor * (rot * p);
        };
        Rng real_rng(mix64(seed, 0x2EA1ULL));
        for (int t = 0; t < n; ++t) {
            auto& kf = frames.kin[t];
            for (ArmFrame* a : {&kf.left, &kf.right}) {
                a->position = map_pos(a->position);
                if (shift.kin_noise_sigma > 0)
                    for (int ax = 0; ax < 3; ++ax)
                        a->position[ax] += real_rng.normal(0, shift.kin_noise_sigma);
            }
            auto& st = frames.scene_state[t];
            // Position-valued entries of the scene state: arm positions,
            // object, start peg, target peg. Gripper entries stay put.
            for (int off : {0, 3, 8, 11, 14})
                st.segment<3>(off) = map_pos(st.segment<3>(off));
        }
    }

    // Visual features: fixed projection of the scene state plus a noise
    // stream shared between domains, then the real-only feature shift.
    const Eigen::MatrixXd w = vision_projection(params);
    const Eigen::VectorXd b = vision_bias(params);
    Rng vis_rng(mix64(seed, 0x715EULL));
    std::vector<Eigen::VectorXd> vis(n);
    for (int t = 0; t < n; ++t) {
        Eigen::VectorXd v = w * frames.scene_state[t] + b;
        for (int i = 0; i < params.vis_dim; ++i) v[i] += vis_rng.normal(0, kVisFeatureSigma);
        vis[t] = v;
    }
    if (domain == kDomainReal && shift.vis.active) {
        const Eigen::MatrixXd a = shift.vis.affine(params.vis_dim);
        const Eigen::VectorXd vb = shift.vis.bias(params.vis_dim);
        Rng shift_rng(mix64(seed, 0x51F7ULL));
        for (int t = 0; t < n; ++t) {
            Eigen::VectorXd v = a * vis[t] + vb;
            if (shift.vis.noise_sigma > 0)
                for (int i = 0; i < params.vis_dim; ++i)
                    v[i] += shift_rng.normal(0, shift.vis.noise_sigma);
            vis[t] = v;
        }
    }

    std::vector<Segment> segments;
    segments.reserve(frames.segment_start.size());
    for (size_t s = 0; s < frames.segment_start.size(); ++s) {
        const int begin = frames.segment_start[s];
        const int end = s + 1 < frames.segment_start.size()
                            ? frames.segment_start[s + 1]
                            : n;
        Segment seg;
        seg.first_frame = begin;
        seg.gesture = frames.label[begin];
        seg.domain = domain;
        for (int t = begin; t < end; ++t) {
            seg.kin.push_back(frames.kin[t]);
            seg.vis.push_back(vis[t]);
        }
        segments.push_back(std::move(seg));
    }
    return segments;
}

PairedDataset generate_dataset(const ShiftConfig& shift, int n_trials, std::uint64_t seed,
                               const SynthParams& params) {
    if (n_trials < 1) throw std::invalid_argument("generate_dataset: n_trials must be >= 1");
    PairedDataset out;
    out.sim.vis_dim = out.real.vis_dim = params.vis_dim;
    int sim_id = 0, real_id = 0;
    for (int i = 0; i < n_trials; ++i) {
        Rng script_rng(mix64(seed, 2 * static_cast<std::uint64_t>(i) + 1));
        const GestureScript script = standard_script(script_rng);
        const std::uint64_t trial_seed = mix64(seed, 0x7D1A1ULL + i);
        for (int domain : {kDomainSimulator, kDomainReal}) {
            auto segs = generate_trial(script, domain, shift, trial_seed, params);
            auto& ds = domain == kDomainSimulator ? out.sim : out.real;
            int& next_id = domain == kDomainSimulator ? sim_id : real_id;
            for (auto& s : segs) {
                s.trial_id = i;
                s.id = next_id++;
                ds.segments.push_back(std::move(s));
            }
        }
    }
    return out;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_domain_tables(const std::string& dir, const Dataset& ds) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream kin(dir + "/kinematics.csv");
    std::ofstream feat(dir + "/features.csv");
    std::ofstream lab(dir + "/labels.csv");
    if (!kin || !feat || !lab) throw std::runtime_error("cannot write dataset tables in " + dir);

    kin << "trial_id,frame,l_pos_x,l_pos_y,l_pos_z,l_yaw,l_pitch,l_roll,l_grip,"
           "r_pos_x,r_pos_y,r_pos_z,r_yaw,r_pitch,r_roll,r_grip\n";
    const int vis_dim = ds.vis_dim;
    feat << "trial_id,frame";
    for (int i = 0; i < vis_dim; ++i) feat << ",f" << i;
    feat << "\n";
    lab << "trial_id,frame,gesture_id\n";

    for (const auto& seg : ds.segments) {
        for (int t = 0; t < seg.length(); ++t) {
            const int frame = seg.first_frame + t;
            kin << seg.trial_id << ',' << frame;
            const auto flat = seg.kin[t].flat();
            for (int i = 0; i < kKinDim; ++i) kin << ',' << fmt_double(flat[i]);
            kin << '\n';
            feat << seg.trial_id << ',' << frame;
            for (int i = 0; i < vis_dim; ++i) feat << ',' << fmt_double(seg.vis[t][i]);
            feat << '\n';
            lab << seg.trial_id << ',' << frame << ',' << seg.gesture << '\n';
        }
    }
}

}  // namespace

void write_dataset(const std::string& dir, const PairedDataset& data,
                   const std::string& preset_name, const ShiftConfig& shift,
                   int n_trials, std::uint64_t seed, const SynthParams& params) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_domain_tables(dir + "/sim", data.sim);
    write_domain_tables(dir + "/real", data.real);
    write_segment_index(data.sim.segments, dir + "/sim/segments.json");
    write_segment_index(data.real.segments, dir + "/real/segments.json");

    nlohmann::json manifest;
    manifest["format"] = "kvda.dataset.v1";
    manifest["preset"] = preset_name;
    manifest["n_trials"] = n_trials;
    manifest["seed"] = seed;
    manifest["vis_dim"] = params.vis_dim;
    manifest["shift"] = {{"translation", {shift.translation.x(), shift.translation.y(),
                                          shift.translation.z()}},
                         {"scale_factor", shift.scale_factor},
                         {"tilt_angle", shift.tilt_angle},
                         {"kin_noise_sigma", shift.kin_noise_sigma},
                         {"vis_shift", {{"active", shift.vis.active},
                                        {"mix", shift.vis.mix},
                                        {"bias_scale", shift.vis.bias_scale},
                                        {"noise_sigma", shift.vis.noise_sigma},
                                        {"seed", shift.vis.seed}}}};
    const std::string body = manifest.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : body) h = (h ^ c) * 1099511628211ULL;
    char hex[20];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    manifest["config_hash"] = hex;

    std::ofstream out(dir + "/manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest in " + dir);
    out << manifest.dump(1) << "\n";
}

}  // namespace kvda
