#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace wbnmpc::rbd {

enum class JointType { FloatingPlanarBase, RevolutePlanar };

struct BodyParams {
  std::string name;
  double mass = 0.0;          // kg
  Eigen::Vector2d com;        // m, body frame
  double inertia = 0.0;       // kg m^2 about the com
};

struct JointParams {
  JointType type = JointType::RevolutePlanar;
  int parent = -1;            // parent body index, -1 = world (base joint only)
  Eigen::Vector2d placement;  // joint origin in the parent frame, m
  double placement_angle = 0.0;
};

struct ContactPoint {
  std::string name;
  int body = -1;
  Eigen::Vector2d offset;     // point in the body frame, m
};

// "foot-ordering" pair: h = p_{left,y} - p_{right,y} - margin >= 0.
struct CollisionPair {
  std::string left;
  std::string right;
  double margin = 0.0;        // m
};

/// Kinematic and inertial description of a planar floating-base chain.
///
/// Body i is driven by joint i; joint 0 is the floating base (lateral y,
/// vertical z, roll), every other joint is planar-revolute with parent < i.
/// Configuration layout: [y, z, roll, q_1 .. q_nj] with joint i at index
/// i + 2; velocities use the same layout (the velocity-to-configuration-rate
/// map is the identity in this parameterization).
struct ModelSpec {
  std::string name;
  std::vector<BodyParams> bodies;
  std::vector<JointParams> joints;
  std::vector<ContactPoint> contact_points;
  std::vector<CollisionPair> collision_pairs;
  Eigen::VectorXd q_min, q_max;    // actuated joints, rad
  Eigen::VectorXd v_max;           // rad/s
  Eigen::VectorXd tau_max;         // N m
  Eigen::Vector2d gravity{0.0, -9.81};

  int num_bodies() const { return static_cast<int>(bodies.size()); }
  int nj() const { return num_bodies() - 1; }
  int nq() const { return nj() + 3; }
  int nv() const { return nj() + 3; }
  int num_contacts() const { return static_cast<int>(contact_points.size()); }

  /// Generalized-coordinate index of the revolute joint driving body `i`.
  int joint_dof(int body) const { return body + 2; }

  int contact_index(const std::string& contact_name) const;  // throws on unknown name

  void validate() const;  // throws std::invalid_argument on any broken invariant

  static ModelSpec load(const std::string& path);
  static ModelSpec from_json_text(const std::string& text);
};

struct State {
  Eigen::VectorXd q;
  Eigen::VectorXd v;

  State() = default;
  State(Eigen::VectorXd q_in, Eigen::VectorXd v_in) : q(std::move(q_in)), v(std::move(v_in)) {}

  /// Dimensions match the model and all entries are finite.
  bool valid_for(const ModelSpec& model) const;
};

}  // namespace wbnmpc::rbd
