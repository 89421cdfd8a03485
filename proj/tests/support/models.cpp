#include "support/models.hpp"

namespace wbnmpc::testing {

rbd::ModelSpec reference_biped() {
  static const rbd::ModelSpec model =
      rbd::ModelSpec::load(std::string(WBNMPC_SOURCE_DIR) + "/configs/reference_biped.json");
  return model;
}

rbd::ModelSpec pendulum(double mass, double com_len, double inertia) {
  rbd::ModelSpec m;
  m.name = "pendulum";
  m.gravity = {0.0, -9.81};
  m.bodies.push_back({"anchor", 1.0, {0.0, 0.0}, 0.01});
  m.bodies.push_back({"rod", mass, {0.0, -com_len}, inertia});
  m.joints.push_back({rbd::JointType::FloatingPlanarBase, -1, {0.0, 0.0}, 0.0});
  m.joints.push_back({rbd::JointType::RevolutePlanar, 0, {0.0, 0.0}, 0.0});
  m.contact_points.push_back({"tip", 1, {0.0, -2.0 * com_len}});
  m.q_min = Eigen::VectorXd::Constant(1, -10.0);
  m.q_max = Eigen::VectorXd::Constant(1, 10.0);
  m.v_max = Eigen::VectorXd::Constant(1, 100.0);
  m.tau_max = Eigen::VectorXd::Constant(1, 100.0);
  m.validate();
  return m;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = (rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

Eigen::VectorXd random_configuration(const rbd::ModelSpec& m, std::mt19937_64& rng) {
  Eigen::VectorXd q(m.nq());
  q[0] = uniform(rng, -0.5, 0.5);
  q[1] = uniform(rng, 0.2, 0.8);
  q[2] = uniform(rng, -0.6, 0.6);
  for (int j = 0; j < m.nj(); ++j) {
    q[3 + j] = uniform(rng, m.q_min[j] * 0.8, m.q_max[j] * 0.8);
  }
  return q;
}

Eigen::VectorXd random_velocity(const rbd::ModelSpec& m, std::mt19937_64& rng) {
  Eigen::VectorXd v(m.nv());
  for (int i = 0; i < m.nv(); ++i) v[i] = uniform(rng, -2.0, 2.0);
  return v;
}

}  // namespace wbnmpc::testing
