#pragma once

#include <Eigen/Core>
#include <vector>

#include "kvda/segment.hpp"

namespace kvda {

/// One motion-direction frame: per arm a unit direction vector, the raw
/// orientation angles and the gripper mapped to [0, 1]. 14 values total.
struct MdokFrame {
    Eigen::Vector3d dir_left{0, 0, 0};
    double yaw_left = 0, pitch_left = 0, roll_left = 0;
    double grip_left = 0;
    Eigen::Vector3d dir_right{0, 0, 0};
    double yaw_right = 0, pitch_right = 0, roll_right = 0;
    double grip_right = 0;

    Eigen::Matrix<double, kKinDim, 1> flat() const;
};

/// D_{t->t+1} = p_{t+1} - p_t.
Eigen::Vector3d relative_direction(const Eigen::Vector3d& p_t, const Eigen::Vector3d& p_t1);

/// D / |D| when |D| >= 1e-8, zero vector for the degenerate stationary case.
Eigen::Vector3d unit_normalize(const Eigen::Vector3d& d);

/// Gripper raw 30-100 scale mapped linearly onto [0, 1], clamped.
double normalize_gripper(double raw);

/// Motion-direction transform of a segment: frame t pairs the unit
/// direction t->t+1 with orientation and gripper of frame t. Output
/// length is exactly T-1. Throws when T < 2.
std::vector<MdokFrame> transform_segment(const Segment& segment);

/// transform_segment as a (T-1) x 14 matrix, rows in frame order.
Eigen::MatrixXd mdok_matrix(const Segment& segment);

/// Position-vector variant used by the baseline ablation: raw positions in
/// place of unit directions, same frame range, orientation and normalized
/// gripper unchanged.
Eigen::MatrixXd position_matrix(const Segment& segment);

/// Visual features aligned with the transformed kinematics: frame T is
/// dropped. (T-1) x f matrix.
Eigen::MatrixXd visual_matrix(const Segment& segment);

}  // namespace kvda
