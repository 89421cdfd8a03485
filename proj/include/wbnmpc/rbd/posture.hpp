#pragma once

#include "wbnmpc/rbd/dynamics.hpp"
#include "wbnmpc/rbd/model.hpp"

namespace wbnmpc::rbd {

/// Joint configuration that places every contact point on the ground
/// (z = ground_height) directly below the first joint of its leg chain, with
/// the base at (0, base_height, 0). Solved per leg by Newton iteration on the
/// two chain joints; knees are seeded bent outward so the iteration stays off
/// the straight-leg singularity.
Eigen::VectorXd standing_pose(const ModelSpec& m, double base_height, double ground_height = 0.0);

/// Static stance forces for a standing configuration: vertical load split
/// evenly across all contacts, zero tangential force.
std::vector<Eigen::Vector2d> static_contact_forces(const ModelSpec& m);

/// Joint torques holding `q` at rest under the given contact forces.
Eigen::VectorXd static_torques(const ModelSpec& m, const Eigen::VectorXd& q,
                               const std::vector<Eigen::Vector2d>& f_ext);

}  // namespace wbnmpc::rbd
