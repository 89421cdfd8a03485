#include "wbnmpc/rbd/posture.hpp"

#include <Eigen/Dense>

#include <stdexcept>

namespace wbnmpc::rbd {

namespace {

// joints between the contact's body and the base, base side first
std::vector<int> chain_joints(const ModelSpec& m, int body) {
  std::vector<int> chain;
  for (int i = body; i >= 1; i = m.joints[i].parent) chain.push_back(i);
  std::reverse(chain.begin(), chain.end());
  return chain;
}

}  // namespace

Eigen::VectorXd standing_pose(const ModelSpec& m, double base_height, double ground_height) {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(m.nq());
  q[1] = base_height;

  const Eigen::VectorXd v0 = Eigen::VectorXd::Zero(m.nv());
  for (int c = 0; c < m.num_contacts(); ++c) {
    const auto chain = chain_joints(m, m.contact_points[c].body);
    if (chain.size() != 2) {
      throw std::invalid_argument("standing_pose: expects two-joint legs");
    }
    const int hip = chain[0], knee = chain[1];
    const double side = m.joints[hip].placement.x() >= 0.0 ? 1.0 : -1.0;
    q[m.joint_dof(hip)] = -0.25 * side;
    q[m.joint_dof(knee)] = 0.5 * side;

    const Eigen::Vector2d target{m.joints[hip].placement.x() + q[0], ground_height};
    for (int iter = 0; iter < 100; ++iter) {
      const ContactKin kin = contact_kinematics(m, q, v0, c);
      const Eigen::Vector2d err = kin.position - target;
      if (err.norm() < 1e-12) break;
      Eigen::Matrix2d J;
      J.col(0) = kin.jacobian.col(m.joint_dof(hip));
      J.col(1) = kin.jacobian.col(m.joint_dof(knee));
      const Eigen::Vector2d step = J.fullPivLu().solve(err);
      q[m.joint_dof(hip)] -= step.x();
      q[m.joint_dof(knee)] -= step.y();
    }
    const ContactKin kin = contact_kinematics(m, q, v0, c);
    if ((kin.position - target).norm() > 1e-9) {
      throw std::runtime_error("standing_pose: leg IK did not converge (base height unreachable?)");
    }
  }
  return q;
}

std::vector<Eigen::Vector2d> static_contact_forces(const ModelSpec& m) {
  double total_mass = 0.0;
  for (const auto& b : m.bodies) total_mass += b.mass;
  const double share = total_mass * m.gravity.norm() / std::max(1, m.num_contacts());
  return std::vector<Eigen::Vector2d>(m.num_contacts(), Eigen::Vector2d{0.0, share});
}

Eigen::VectorXd static_torques(const ModelSpec& m, const Eigen::VectorXd& q,
                               const std::vector<Eigen::Vector2d>& f_ext) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.nv());
  return rnea(m, q, zero, zero, f_ext).tail(m.nj());
}

}  // namespace wbnmpc::rbd
