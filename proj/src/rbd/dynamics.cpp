#include "wbnmpc/rbd/dynamics.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace wbnmpc::rbd {

namespace {

void check_dims(const ModelSpec& m, const Eigen::VectorXd& q, const Eigen::VectorXd& v,
                const Eigen::VectorXd& a, const std::vector<Eigen::Vector2d>& f_ext) {
  if (q.size() != m.nq() || v.size() != m.nv() || a.size() != m.nv()) {
    throw std::invalid_argument("rnea: q/v/a dimension mismatch with model");
  }
  if (!f_ext.empty() && static_cast<int>(f_ext.size()) != m.num_contacts()) {
    throw std::invalid_argument("rnea: need one external force per contact point");
  }
}

}  // namespace

Eigen::VectorXd rnea(const ModelSpec& m, const Eigen::VectorXd& q, const Eigen::VectorXd& v,
                     const Eigen::VectorXd& a, const std::vector<Eigen::Vector2d>& f_ext) {
  check_dims(m, q, v, a, f_ext);
  Eigen::VectorXd out(m.nv());
  static thread_local std::vector<BodyMotion<double>> scratch;
  rnea_t<double>(m, {q.data(), static_cast<size_t>(q.size())},
                 {v.data(), static_cast<size_t>(v.size())},
                 {a.data(), static_cast<size_t>(a.size())},
                 {f_ext.data(), f_ext.size()},
                 {out.data(), static_cast<size_t>(out.size())}, scratch);
  return out;
}

Eigen::MatrixXd mass_matrix(const ModelSpec& m, const Eigen::VectorXd& q) {
  const int n = m.nv();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd bias = rnea(m, q, zero, zero);
  Eigen::MatrixXd M(n, n);
  Eigen::VectorXd ei = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    ei[i] = 1.0;
    M.col(i) = rnea(m, q, zero, ei) - bias;
    ei[i] = 0.0;
  }
  return M;
}

Eigen::VectorXd forward_dynamics(const ModelSpec& m, const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& v, const Eigen::VectorXd& tau,
                                 const std::vector<Eigen::Vector2d>& f_ext) {
  if (tau.size() != m.nj()) throw std::invalid_argument("forward_dynamics: tau size mismatch");
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.nv());
  Eigen::VectorXd rhs = -rnea(m, q, v, zero, f_ext);
  rhs.tail(m.nj()) += tau;
  const Eigen::MatrixXd M = mass_matrix(m, q);
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("forward_dynamics: mass matrix not positive definite");
  }
  Eigen::VectorXd a = llt.solve(rhs);
  const double rel = (M * a - rhs).norm() / (rhs.norm() + 1.0);
  if (!(rel <= 1e-10)) {
    throw std::runtime_error("forward_dynamics: linear solve residual too large");
  }
  return a;
}

Eigen::Matrix<double, 2, Eigen::Dynamic> point_jacobian(const ModelSpec& m,
                                                        const Eigen::VectorXd& q, int body,
                                                        const Eigen::Vector2d& offset) {
  static thread_local std::vector<BodyMotion<double>> frames;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.nv());
  forward_pass<double>(m, {q.data(), static_cast<size_t>(q.size())},
                       {zero.data(), static_cast<size_t>(zero.size())},
                       {zero.data(), static_cast<size_t>(zero.size())}, frames);

  const BodyMotion<double>& b = frames[body];
  const double c = std::cos(b.angle), s = std::sin(b.angle);
  const PVec<double> p = b.pos + rotate(c, s, PVec<double>{offset.x(), offset.y()});

  Eigen::Matrix<double, 2, Eigen::Dynamic> J = Eigen::MatrixXd::Zero(2, m.nv());
  J(0, 0) = 1.0;
  J(1, 1) = 1.0;
  J(0, 2) = -(p.z - frames[0].pos.z);
  J(1, 2) = p.y - frames[0].pos.y;
  for (int i = body; i >= 1; i = m.joints[i].parent) {
    const int d = m.joint_dof(i);
    J(0, d) = -(p.z - frames[i].pos.z);
    J(1, d) = p.y - frames[i].pos.y;
  }
  return J;
}

ContactKin contact_kinematics(const ModelSpec& m, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& v, int contact) {
  if (contact < 0 || contact >= m.num_contacts()) {
    throw std::invalid_argument("contact_kinematics: contact index out of range");
  }
  const ContactPoint& cp = m.contact_points[contact];

  static thread_local std::vector<BodyMotion<double>> frames;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.nv());
  forward_pass<double>(m, {q.data(), static_cast<size_t>(q.size())},
                       {v.data(), static_cast<size_t>(v.size())},
                       {zero.data(), static_cast<size_t>(zero.size())}, frames);

  const BodyMotion<double>& b = frames[cp.body];
  const double c = std::cos(b.angle), s = std::sin(b.angle);
  const PVec<double> r = rotate(c, s, PVec<double>{cp.offset.x(), cp.offset.y()});
  const PVec<double> pos = b.pos + r;
  const PVec<double> vel = b.vel + b.omega * perp(r);
  // zero joint acceleration, so the point acceleration is Jdot * v
  const PVec<double> jdv = b.acc + b.alpha * perp(r) - b.omega * b.omega * r;

  ContactKin out;
  out.position = {pos.y, pos.z};
  out.velocity = {vel.y, vel.z};
  out.jdot_times_v = {jdv.y, jdv.z};
  out.jacobian = point_jacobian(m, q, cp.body, cp.offset);
  return out;
}

ContactKin contact_kinematics(const ModelSpec& m, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& v, const std::string& contact_name) {
  return contact_kinematics(m, q, v, m.contact_index(contact_name));
}

CollisionEval collision_constraint(const ModelSpec& m, const Eigen::VectorXd& q,
                                   const Eigen::VectorXd& v) {
  const int np = static_cast<int>(m.collision_pairs.size());
  if (np == 0) throw std::invalid_argument("collision_constraint: model has no collision pairs");

  CollisionEval out;
  out.h.resize(np);
  out.jacobian.setZero(np, m.nv());
  out.jdot_times_v.resize(np);
  for (int i = 0; i < np; ++i) {
    const CollisionPair& pair = m.collision_pairs[i];
    const ContactKin left = contact_kinematics(m, q, v, pair.left);
    const ContactKin right = contact_kinematics(m, q, v, pair.right);
    out.h[i] = left.position.x() - right.position.x() - pair.margin;
    out.jacobian.row(i) = left.jacobian.row(0) - right.jacobian.row(0);
    out.jdot_times_v[i] = left.jdot_times_v.x() - right.jdot_times_v.x();
  }
  return out;
}

double total_energy(const ModelSpec& m, const Eigen::VectorXd& q, const Eigen::VectorXd& v) {
  static thread_local std::vector<BodyMotion<double>> frames;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.nv());
  forward_pass<double>(m, {q.data(), static_cast<size_t>(q.size())},
                       {v.data(), static_cast<size_t>(v.size())},
                       {zero.data(), static_cast<size_t>(zero.size())}, frames);
  double kinetic = 0.0, potential = 0.0;
  for (int i = 0; i < m.num_bodies(); ++i) {
    const BodyMotion<double>& b = frames[i];
    const BodyParams& bp = m.bodies[i];
    const double c = std::cos(b.angle), s = std::sin(b.angle);
    const PVec<double> rc = rotate(c, s, PVec<double>{bp.com.x(), bp.com.y()});
    const PVec<double> vc = b.vel + b.omega * perp(rc);
    const PVec<double> com = b.pos + rc;
    kinetic += 0.5 * bp.mass * (vc.y * vc.y + vc.z * vc.z) + 0.5 * bp.inertia * b.omega * b.omega;
    potential -= bp.mass * (m.gravity.x() * com.y + m.gravity.y() * com.z);
  }
  return kinetic + potential;
}

Eigen::Vector3d momentum(const ModelSpec& m, const Eigen::VectorXd& q, const Eigen::VectorXd& v,
                         const Eigen::Vector2d& about) {
  static thread_local std::vector<BodyMotion<double>> frames;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m.nv());
  forward_pass<double>(m, {q.data(), static_cast<size_t>(q.size())},
                       {v.data(), static_cast<size_t>(v.size())},
                       {zero.data(), static_cast<size_t>(zero.size())}, frames);
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (int i = 0; i < m.num_bodies(); ++i) {
    const BodyMotion<double>& b = frames[i];
    const BodyParams& bp = m.bodies[i];
    const double c = std::cos(b.angle), s = std::sin(b.angle);
    const PVec<double> rc = rotate(c, s, PVec<double>{bp.com.x(), bp.com.y()});
    const PVec<double> vc = b.vel + b.omega * perp(rc);
    const PVec<double> com = b.pos + rc;
    out[0] += bp.mass * vc.y;
    out[1] += bp.mass * vc.z;
    out[2] += bp.inertia * b.omega +
              bp.mass * ((com.y - about.x()) * vc.z - (com.z - about.y()) * vc.y);
  }
  return out;
}

}  // namespace wbnmpc::rbd
