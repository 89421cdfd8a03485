#pragma once

#include "wbnmpc/rbd/model.hpp"

#include <random>

namespace wbnmpc::testing {

/// The canonical biped shipped in configs/reference_biped.json.
rbd::ModelSpec reference_biped();

/// Floating base plus a single pendulum link; the base is held at zero in
/// tests, which leaves the classic 1-DOF pendulum on the joint row.
rbd::ModelSpec pendulum(double mass = 1.7, double com_len = 0.4, double inertia = 0.03);

/// Random configuration/velocity within sane ranges for derivative checks.
Eigen::VectorXd random_configuration(const rbd::ModelSpec& m, std::mt19937_64& rng);
Eigen::VectorXd random_velocity(const rbd::ModelSpec& m, std::mt19937_64& rng);

double uniform(std::mt19937_64& rng, double lo, double hi);

}  // namespace wbnmpc::testing
