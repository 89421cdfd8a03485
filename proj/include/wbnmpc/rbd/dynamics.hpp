#pragma once

#include "wbnmpc/rbd/dual.hpp"
#include "wbnmpc/rbd/model.hpp"

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <vector>

namespace wbnmpc::rbd {

// make the double overloads visible next to the Dual ones so that unqualified
// calls in the templates below resolve by exact match for either scalar type
using std::cos;
using std::sin;

/// Planar 2-vector templated on the scalar type so dual numbers flow through
/// the kinematics and dynamics unchanged.
template <typename T>
struct PVec {
  T y{};
  T z{};

  PVec() = default;
  PVec(T y_in, T z_in) : y(std::move(y_in)), z(std::move(z_in)) {}

  PVec operator+(const PVec& o) const { return {y + o.y, z + o.z}; }
  PVec operator-(const PVec& o) const { return {y - o.y, z - o.z}; }
  PVec operator-() const { return {-y, -z}; }
  template <typename S>
  friend PVec operator*(const S& s, const PVec& v) { return {s * v.y, s * v.z}; }
};

/// z-hat cross product mapped to the plane: omega x r = omega * perp(r).
template <typename T>
PVec<T> perp(const PVec<T>& r) { return {-r.z, r.y}; }

/// Planar cross product a x b (scalar, out-of-plane component).
template <typename T, typename U>
auto cross2(const PVec<T>& a, const PVec<U>& b) { return a.y * b.z - a.z * b.y; }

template <typename T>
PVec<T> rotate(const T& c, const T& s, const PVec<T>& v) {
  return {c * v.y - s * v.z, s * v.y + c * v.z};
}

/// World-frame motion of one body: frame pose plus the velocity and
/// acceleration of the frame-origin material point.
template <typename T>
struct BodyMotion {
  T angle{};
  PVec<T> pos;
  T omega{};
  PVec<T> vel;
  T alpha{};
  PVec<T> acc;
};

/// Propagates pose, velocity and acceleration down the chain. Gravity is not
/// injected here; accelerations are the purely kinematic ones, so running
/// with a = 0 yields Jdot*v at any body point.
template <typename T>
void forward_pass(const ModelSpec& m, std::span<const T> q, std::span<const T> v,
                  std::span<const T> a, std::vector<BodyMotion<T>>& out) {
  const int nb = m.num_bodies();
  out.resize(nb);

  BodyMotion<T>& base = out[0];
  base.pos = {q[0], q[1]};
  base.angle = q[2];
  base.vel = {v[0], v[1]};
  base.omega = v[2];
  base.acc = {a[0], a[1]};
  base.alpha = a[2];

  for (int i = 1; i < nb; ++i) {
    const JointParams& jnt = m.joints[i];
    const BodyMotion<T>& p = out[jnt.parent];
    const int d = m.joint_dof(i);

    const T cp = cos(p.angle);
    const T sp = sin(p.angle);
    const PVec<T> r = rotate(cp, sp, PVec<T>{T(jnt.placement.x()), T(jnt.placement.y())});

    BodyMotion<T>& b = out[i];
    b.pos = p.pos + r;
    b.angle = p.angle + T(jnt.placement_angle) + q[d];
    b.vel = p.vel + p.omega * perp(r);
    b.omega = p.omega + v[d];
    // material acceleration of the joint origin on the parent
    b.acc = p.acc + p.alpha * perp(r) - (p.omega * p.omega) * r;
    b.alpha = p.alpha + a[d];
  }
}

/// Inverse dynamics: generalized forces sustaining (q, v, a) minus the
/// contribution of the external contact forces. Rows 0..2 are the
/// floating-base wrench (force y, force z, torque about the base origin);
/// the remaining rows are joint torques.
template <typename T>
void rnea_t(const ModelSpec& m, std::span<const T> q, std::span<const T> v,
            std::span<const T> a, std::span<const Eigen::Vector2d> f_ext,
            std::span<T> out, std::vector<BodyMotion<T>>& scratch) {
  const int nb = m.num_bodies();
  forward_pass(m, q, v, a, scratch);

  // per-body wrench about the body frame origin
  static thread_local std::vector<PVec<T>> f_acc;
  static thread_local std::vector<T> n_acc;
  f_acc.assign(nb, PVec<T>{});
  n_acc.assign(nb, T(0.0));

  const PVec<T> g{T(m.gravity.x()), T(m.gravity.y())};
  for (int i = 0; i < nb; ++i) {
    const BodyMotion<T>& b = scratch[i];
    const BodyParams& bp = m.bodies[i];
    const T c = cos(b.angle);
    const T s = sin(b.angle);
    const PVec<T> rc = rotate(c, s, PVec<T>{T(bp.com.x()), T(bp.com.y())});
    const PVec<T> acc_com = b.acc + b.alpha * perp(rc) - (b.omega * b.omega) * rc;
    const PVec<T> f_net{T(bp.mass) * (acc_com.y - g.y), T(bp.mass) * (acc_com.z - g.z)};
    f_acc[i] = f_net;
    n_acc[i] = T(bp.inertia) * b.alpha + cross2(rc, f_net);
  }
  if (!f_ext.empty()) {
    for (size_t ci = 0; ci < m.contact_points.size(); ++ci) {
      const ContactPoint& cp = m.contact_points[ci];
      const BodyMotion<T>& b = scratch[cp.body];
      const T c = cos(b.angle);
      const T s = sin(b.angle);
      const PVec<T> r = rotate(c, s, PVec<T>{T(cp.offset.x()), T(cp.offset.y())});
      const PVec<double> fc{f_ext[ci].x(), f_ext[ci].y()};
      f_acc[cp.body].y -= T(fc.y);
      f_acc[cp.body].z -= T(fc.z);
      n_acc[cp.body] -= r.y * T(fc.z) - r.z * T(fc.y);
    }
  }

  // sweep wrenches toward the base
  for (int i = nb - 1; i >= 1; --i) {
    const int p = m.joints[i].parent;
    const PVec<T> lever = scratch[i].pos - scratch[p].pos;
    f_acc[p] = f_acc[p] + f_acc[i];
    n_acc[p] = n_acc[p] + n_acc[i] + cross2(lever, f_acc[i]);
  }

  out[0] = f_acc[0].y;
  out[1] = f_acc[0].z;
  out[2] = n_acc[0];
  for (int i = 1; i < nb; ++i) out[m.joint_dof(i)] = n_acc[i];
}

// ---------------------------------------------------------------------------
// double-precision interface

Eigen::VectorXd rnea(const ModelSpec& m, const Eigen::VectorXd& q, const Eigen::VectorXd& v,
                     const Eigen::VectorXd& a, const std::vector<Eigen::Vector2d>& f_ext = {});

/// M(q); column i equals rnea(q,0,e_i,0) - rnea(q,0,0,0).
Eigen::MatrixXd mass_matrix(const ModelSpec& m, const Eigen::VectorXd& q);

/// Solves M(q) a = [0; tau] - rnea(q, v, 0, f_ext) for the acceleration.
Eigen::VectorXd forward_dynamics(const ModelSpec& m, const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& v, const Eigen::VectorXd& tau,
                                 const std::vector<Eigen::Vector2d>& f_ext = {});

struct ContactKin {
  Eigen::Vector2d position;
  Eigen::Vector2d velocity;
  Eigen::Matrix<double, 2, Eigen::Dynamic> jacobian;
  Eigen::Vector2d jdot_times_v;
};

ContactKin contact_kinematics(const ModelSpec& m, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& v, int contact);
ContactKin contact_kinematics(const ModelSpec& m, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& v, const std::string& contact_name);

/// Analytic Jacobian of a body-fixed point (2 x nv).
Eigen::Matrix<double, 2, Eigen::Dynamic> point_jacobian(const ModelSpec& m,
                                                        const Eigen::VectorXd& q, int body,
                                                        const Eigen::Vector2d& offset);

struct CollisionEval {
  Eigen::VectorXd h;                 // one row per collision pair, m
  Eigen::MatrixXd jacobian;          // d h / d q
  Eigen::VectorXd jdot_times_v;
};

/// Foot-ordering distance constraints h(q) >= 0 for every collision pair.
CollisionEval collision_constraint(const ModelSpec& m, const Eigen::VectorXd& q,
                                   const Eigen::VectorXd& v);

/// Kinetic plus potential energy; the zero level of the potential is the
/// world origin height.
double total_energy(const ModelSpec& m, const Eigen::VectorXd& q, const Eigen::VectorXd& v);

/// Total momentum (linear y, linear z, angular about `about`, fixed world point).
Eigen::Vector3d momentum(const ModelSpec& m, const Eigen::VectorXd& q, const Eigen::VectorXd& v,
                         const Eigen::Vector2d& about);

}  // namespace wbnmpc::rbd
