#include "kvda/mdok.hpp"

#include <algorithm>
#include <stdexcept>

namespace kvda {

namespace {
constexpr double kDegenerateNorm = 1e-8;
}

Eigen::Matrix<double, kKinDim, 1> MdokFrame::flat() const {
    Eigen::Matrix<double, kKinDim, 1> v;
    v << dir_left.x(), dir_left.y(), dir_left.z(), yaw_left, pitch_left, roll_left, grip_left,
        dir_right.x(), dir_right.y(), dir_right.z(), yaw_right, pitch_right, roll_right,
        grip_right;
    return v;
}

Eigen::Vector3d relative_direction(const Eigen::Vector3d& p_t, const Eigen::Vector3d& p_t1) {
    return p_t1 - p_t;
}

Eigen::Vector3d unit_normalize(const Eigen::Vector3d& d) {
    const double n = d.norm();
    if (n < kDegenerateNorm) return Eigen::Vector3d::Zero();
    return d / n;
}

double normalize_gripper(double raw) {
    return std::clamp((raw - 30.0) / 70.0, 0.0, 1.0);
}

std::vector<MdokFrame> transform_segment(const Segment& segment) {
    const int T = segment.length();
    if (T < 2) throw std::invalid_argument("transform_segment: T >= 2 required");
    std::vector<MdokFrame> out(T - 1);
    for (int t = 0; t < T - 1; ++t) {
        const KinematicFrame& a = segment.kin[t];
        const KinematicFrame& b = segment.kin[t + 1];
        MdokFrame& m = out[t];
        m.dir_left = unit_normalize(relative_direction(a.left.position, b.left.position));
        m.yaw_left = a.left.yaw;
        m.pitch_left = a.left.pitch;
        m.roll_left = a.left.roll;
        m.grip_left = normalize_gripper(a.left.gripper);
        m.dir_right = unit_normalize(relative_direction(a.right.position, b.right.position));
        m.yaw_right = a.right.yaw;
        m.pitch_right = a.right.pitch;
        m.roll_right = a.right.roll;
        m.grip_right = normalize_gripper(a.right.gripper);
    }
    return out;
}

Eigen::MatrixXd mdok_matrix(const Segment& segment) {
    const auto frames = transform_segment(segment);
    Eigen::MatrixXd m(frames.size(), kKinDim);
    for (size_t t = 0; t < frames.size(); ++t) m.row(t) = frames[t].flat().transpose();
    return m;
}

Eigen::MatrixXd position_matrix(const Segment& segment) {
    const int T = segment.length();
    if (T < 2) throw std::invalid_argument("position_matrix: T >= 2 required");
    Eigen::MatrixXd m(T - 1, kKinDim);
    for (int t = 0; t < T - 1; ++t) {
        const KinematicFrame& a = segment.kin[t];
        m(t, 0) = a.left.position.x();
        m(t, 1) = a.left.position.y();
        m(t, 2) = a.left.position.z();
        m(t, 3) = a.left.yaw;
        m(t, 4) = a.left.pitch;
        m(t, 5) = a.left.roll;
        m(t, 6) = normalize_gripper(a.left.gripper);
        m(t, 7) = a.right.position.x();
        m(t, 8) = a.right.position.y();
        m(t, 9) = a.right.position.z();
        m(t, 10) = a.right.yaw;
        m(t, 11) = a.right.pitch;
        m(t, 12) = a.right.roll;
        m(t, 13) = normalize_gripper(a.right.gripper);
    }
    return m;
}

Eigen::MatrixXd visual_matrix(const Segment& segment) {
    const int T = segment.length();
    if (T < 2) throw std::invalid_argument("visual_matrix: T >= 2 required");
    const int f = segment.vis.empty() ? 0 : static_cast<int>(segment.vis[0].size());
    Eigen::MatrixXd m(T - 1, f);
    for (int t = 0; t < T - 1; ++t) m.row(t) = segment.vis[t].transpose();
    return m;
}

}  // namespace kvda
