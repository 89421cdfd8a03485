#include "wbnmpc/ocp/transcription.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>

namespace wbnmpc::ocp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
using rbd::Dual;
using rbd::PVec;

/// world position and velocity of a contact point from computed body frames
template <typename T>
void point_state(const rbd::ModelSpec& m, const std::vector<rbd::BodyMotion<T>>& frames, int ci,
                 PVec<T>& pos, PVec<T>& vel) {
  using std::cos;
  using std::sin;
  const rbd::ContactPoint& cp = m.contact_points[ci];
  const rbd::BodyMotion<T>& b = frames[cp.body];
  const T c = cos(b.angle);
  const T s = sin(b.angle);
  const PVec<T> r = rotate(c, s, PVec<T>{T(cp.offset.x()), T(cp.offset.y())});
  pos = b.pos + r;
  vel = b.vel + b.omega * perp(r);
}

// --- emitters driving the shared row/cost walks -----------------------------
// Every walk performs the exact same sequence of row/coeff calls regardless
// of values, which is what keeps the sparsity pattern and the slot maps in
// lockstep.

struct PatternEmitter {
  std::vector<Eigen::Triplet<double>>* trips;
  int cur = 0;
  void row(int r) { cur = r; }
  void coeff(int col, double) { trips->emplace_back(cur, col, 0.0); }
  void bounds(double, double, double) {}
};

struct SlotEmitter {
  const qp::SpMat* pattern;
  std::vector<Eigen::Index>* slots;
  int cur = 0;
  void row(int r) { cur = r; }
  void coeff(int col, double) { slots->push_back(qp::value_slot(*pattern, cur, col)); }
  void bounds(double, double, double) {}
};

struct ValueEmitter {
  double* values;
  const std::vector<Eigen::Index>* slots;
  size_t next = 0;
  Eigen::VectorXd* G = nullptr;
  Eigen::VectorXd* L = nullptr;
  Eigen::VectorXd* U = nullptr;
  double violation = 0.0;
  int cur = 0;
  void row(int r) { cur = r; }
  void coeff(int, double v) { values[(*slots)[next++]] += v; }
  void bounds(double g, double lo, double up) {
    (*G)[cur] = g;
    (*L)[cur] = lo;
    (*U)[cur] = up;
    violation = std::max({violation, lo - g, g - up});
  }
};

struct PointEmitter {
  double violation = 0.0;
  void row(int) {}
  void coeff(int, double) {}
  void bounds(double g, double lo, double up) {
    violation = std::max({violation, lo - g, g - up});
  }
};

struct NoopEmitter {
  void row(int) {}
  void coeff(int, double) {}
  void bounds(double, double, double) {}
};

}  // namespace

// --- standalone row computations -------------------------------------------

Eigen::VectorXd integration_residual(const Eigen::VectorXd& q0, const Eigen::VectorXd& v0,
                                     const Eigen::VectorXd& q1, const Eigen::VectorXd& v1,
                                     double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("integration_residual: dt must be positive");
  if (q0.size() != q1.size() || v0.size() != v1.size() || q0.size() != v0.size())
    throw std::invalid_argument("integration_residual: size mismatch");
  return q1 - q0 - 0.5 * dt * (v0 + v1);
}

Eigen::VectorXd dynamics_residual(const rbd::ModelSpec& model, const Eigen::VectorXd& q0,
                                  const Eigen::VectorXd& v0, const Eigen::VectorXd& v1,
                                  const Eigen::VectorXd& tau,
                                  const std::vector<Eigen::Vector2d>& forces, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dynamics_residual: dt must be positive");
  const Eigen::VectorXd vdot = (v1 - v0) / dt;
  Eigen::VectorXd r = rbd::rnea(model, q0, v0, vdot, forces);
  r.tail(model.nj()) -= tau;
  return r;
}

Eigen::Matrix<double, 5, 1> force_row_values(const Eigen::Vector2d& F, double theta, double mu) {
  Eigen::Matrix<double, 5, 1> rows;
  rows[0] = (1.0 - theta) * F.x();
  rows[1] = (1.0 - theta) * F.y();
  rows[2] = theta * (mu * F.y() - F.x());
  rows[3] = theta * (mu * F.y() + F.x());
  rows[4] = theta * F.y();
  return rows;
}

std::vector<CBFRow> cbf_rows(const rbd::ModelSpec& model, const rbd::State& measured,
                             double alpha1, double alpha2, double dt0) {
  if (!(dt0 > 0.0)) throw std::invalid_argument("cbf_rows: dt0 must be positive");
  if (!measured.valid_for(model)) throw std::invalid_argument("cbf_rows: bad measured state");
  const rbd::CollisionEval ce = rbd::collision_constraint(model, measured.q, measured.v);
  std::vector<CBFRow> rows(ce.h.size());
  for (Eigen::Index i = 0; i < ce.h.size(); ++i) {
    const Eigen::VectorXd J = ce.jacobian.row(i).transpose();
    CBFRow& r = rows[i];
    r.coeff_v1 = J / dt0;
    r.coeff_v0 = -J / dt0;
    r.lower = -(ce.jdot_times_v[i] + (alpha1 + alpha2) * J.dot(measured.v) +
                alpha1 * alpha2 * ce.h[i]);
  }
  return rows;
}

// --- Transcription ----------------------------------------------------------

Transcription::Transcription(rbd::ModelSpec model, int N, int torque_stages)
    : model_(std::move(model)), layout_(build_layout(model_, N, torque_stages)) {
  model_.validate();
  if (3 * model_.nv() > rbd::kMaxSeedDim)
    throw std::invalid_argument("Transcription: model too large for the derivative seed width");

  for (const auto& cp : model_.collision_pairs) {
    PairInfo pi;
    pi.left = model_.contact_index(cp.left);
    pi.right = model_.contact_index(cp.right);
    pi.margin = cp.margin;
    std::set<int> sup{2};  // base roll; base translation cancels in the difference
    for (const int ci : {pi.left, pi.right})
      for (int b = model_.contact_points[ci].body; b > 0; b = model_.joints[b].parent)
        sup.insert(model_.joint_dof(b));
    pi.support.assign(sup.begin(), sup.end());
    pairs_.push_back(std::move(pi));
  }

  const int nc = layout_.nc, np = layout_.np, nq = layout_.nq, nv = layout_.nv;
  kin_ws_.resize(layout_.N + 1);
  for (auto& k : kin_ws_) {
    k.pz.resize(nc);
    k.vy.resize(nc);
    k.pz_Jq.resize(nc, nq);
    k.vy_Jq.resize(nc, nq);
    k.vy_Jv.resize(nc, nv);
    k.h.resize(np);
    k.h_Jq.resize(np, nq);
  }
  dyn_ws_.resize(layout_.N);
  for (auto& d : dyn_ws_) {
    d.id.resize(nv);
    d.Jq.resize(nv, nq);
    d.Jv0.resize(nv, nv);
    d.Jv1.resize(nv, nv);
  }
  wdiag_.resize(layout_.n_z);
  wlin_.resize(layout_.n_z);

  // fix the patterns with one structural pass over a neutral iterate
  NLPParameters dummy;
  dummy.measured.q = Eigen::VectorXd::Zero(nq);
  dummy.measured.v = Eigen::VectorXd::Zero(nv);
  dummy.schedule = make_gait({}, nc, layout_.N, 1.0, 0.0);
  dummy.tau_prev = Eigen::VectorXd::Zero(layout_.nj);
  dummy.q_nominal = Eigen::VectorXd::Zero(nq);
  const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(layout_.n_z);
  compute_stage_data<true>(z0, dummy);

  {
    std::vector<Eigen::Triplet<double>> trips;
    PatternEmitter pe{&trips};
    walk_rows(z0, dummy, pe);
    a_pattern_.resize(layout_.m_rows, layout_.n_z);
    a_pattern_.setFromTriplets(trips.begin(), trips.end());
    a_pattern_.makeCompressed();
    SlotEmitter se{&a_pattern_, &a_slots_};
    walk_rows(z0, dummy, se);
  }
  {
    std::vector<Eigen::Triplet<double>> trips;
    PatternEmitter pe{&trips};
    double cost = 0.0;
    walk_cost(z0, dummy, pe, cost, nullptr);
    h_pattern_.resize(layout_.n_z, layout_.n_z);
    h_pattern_.setFromTriplets(trips.begin(), trips.end());
    h_pattern_.makeCompressed();
    SlotEmitter se{&h_pattern_, &h_slots_};
    walk_cost(z0, dummy, se, cost, nullptr);
  }
}

void Transcription::check_inputs(const Eigen::VectorXd& z, const NLPParameters& p) const {
  if (z.size() != layout_.n_z) throw std::invalid_argument("eval: iterate size mismatch");
  if (!z.allFinite()) throw std::invalid_argument("eval: non-finite iterate");
  if (!p.measured.valid_for(model_)) throw std::invalid_argument("eval: bad measured state");
  p.schedule.validate();
  if (p.schedule.N != layout_.N || p.schedule.num_contacts() != layout_.nc)
    throw std::invalid_argument("eval: schedule dimensions mismatch");
  if (p.tau_prev.size() != layout_.nj) throw std::invalid_argument("eval: tau_prev size");
  if (p.q_nominal.size() != layout_.nq) throw std::invalid_argument("eval: q_nominal size");
  if (!(p.mu > 0.0)) throw std::invalid_argument("eval: friction coefficient must be positive");
  if (!(p.alpha1 > 0.0 && p.alpha2 > 0.0))
    throw std::invalid_argument("eval: barrier gains must be positive");
}

template <bool derivs>
void Transcription::compute_stage_data(const Eigen::VectorXd& z, const NLPParameters& p) {
  const int N = layout_.N, nq = layout_.nq, nv = layout_.nv, nc = layout_.nc;
  const int np = layout_.np;

  cbf_ws_ = cbf_rows(model_, p.measured, p.alpha1, p.alpha2, p.schedule.dt[0]);

  thread_local std::vector<Eigen::Vector2d> forces;
  forces.resize(nc);

  if constexpr (derivs) {
    thread_local std::vector<Dual> qd, vd, v1d, ad, outd;
    thread_local std::vector<rbd::BodyMotion<Dual>> frames;
    thread_local std::vector<PVec<Dual>> pos, vel;
    qd.resize(nq);
    vd.resize(nv);
    v1d.resize(nv);
    ad.resize(nv);
    outd.resize(nv);
    pos.resize(nc);
    vel.resize(nc);

    // kinematic pass per node: seeds [q | v], width 2*nq
    for (int k = 0; k <= N; ++k) {
      const auto q = z.segment(layout_.q_of(k), nq);
      const auto v = z.segment(layout_.v_of(k), nv);
      for (int i = 0; i < nq; ++i) {
        qd[i] = Dual::seed(q[i], 2 * nq, i);
        vd[i] = Dual::seed(v[i], 2 * nq, nq + i);
        ad[i] = Dual(0.0);
      }
      rbd::forward_pass<Dual>(model_, {qd.data(), qd.size()}, {vd.data(), vd.size()},
                              {ad.data(), ad.size()}, frames);
      StageKin& kin = kin_ws_[k];
      for (int c = 0; c < nc; ++c) {
        point_state(model_, frames, c, pos[c], vel[c]);
        kin.pz[c] = pos[c].z.value();
        kin.vy[c] = vel[c].y.value();
        for (int i = 0; i < nq; ++i) {
          kin.pz_Jq(c, i) = pos[c].z.deriv(i);
          kin.vy_Jq(c, i) = vel[c].y.deriv(i);
          kin.vy_Jv(c, i) = vel[c].y.deriv(nq + i);
        }
      }
      for (int pi = 0; pi < np; ++pi) {
        const Dual h = pos[pairs_[pi].left].y - pos[pairs_[pi].right].y - pairs_[pi].margin;
        kin.h[pi] = h.value();
        for (int i = 0; i < nq; ++i) kin.h_Jq(pi, i) = h.deriv(i);
      }
    }

    // dynamics pass per interval: seeds [q | v0 | v1], width 3*nv
    for (int k = 0; k < N; ++k) {
      const auto q = z.segment(layout_.q_of(k), nq);
      const auto v0 = z.segment(layout_.v_of(k), nv);
      const auto v1 = z.segment(layout_.v_of(k + 1), nv);
      const double inv_dt = 1.0 / p.schedule.dt[k];
      for (int i = 0; i < nv; ++i) {
        qd[i] = Dual::seed(q[i], 3 * nv, i);
        vd[i] = Dual::seed(v0[i], 3 * nv, nv + i);
        v1d[i] = Dual::seed(v1[i], 3 * nv, 2 * nv + i);
        ad[i] = (v1d[i] - vd[i]) * Dual(inv_dt);
      }
      for (int c = 0; c < nc; ++c) forces[c] = z.segment<2>(layout_.f_of(k, c));
      rbd::rnea_t<Dual>(model_, {qd.data(), qd.size()}, {vd.data(), vd.size()},
                        {ad.data(), ad.size()}, {forces.data(), forces.size()},
                        {outd.data(), outd.size()}, frames);
      StageDyn& dyn = dyn_ws_[k];
      for (int r = 0; r < nv; ++r) {
        dyn.id[r] = outd[r].value();
        for (int i = 0; i < nv; ++i) {
          dyn.Jq(r, i) = outd[r].deriv(i);
          dyn.Jv0(r, i) = outd[r].deriv(nv + i);
          dyn.Jv1(r, i) = outd[r].deriv(2 * nv + i);
        }
      }
    }
  } else {
    thread_local std::vector<rbd::BodyMotion<double>> frames;
    thread_local std::vector<PVec<double>> pos, vel;
    thread_local Eigen::VectorXd zero, vdot, out;
    pos.resize(nc);
    vel.resize(nc);
    zero.setZero(nv);
    vdot.resize(nv);
    out.resize(nv);

    for (int k = 0; k <= N; ++k) {
      const auto q = z.segment(layout_.q_of(k), nq);
      const auto v = z.segment(layout_.v_of(k), nv);
      rbd::forward_pass<double>(model_, {q.data(), size_t(nq)}, {v.data(), size_t(nv)},
                                {zero.data(), size_t(nv)}, frames);
      StageKin& kin = kin_ws_[k];
      for (int c = 0; c < nc; ++c) {
        point_state(model_, frames, c, pos[c], vel[c]);
        kin.pz[c] = pos[c].z;
        kin.vy[c] = vel[c].y;
      }
      for (int pi = 0; pi < np; ++pi)
        kin.h[pi] = pos[pairs_[pi].left].y - pos[pairs_[pi].right].y - pairs_[pi].margin;
    }
    for (int k = 0; k < N; ++k) {
      const auto q = z.segment(layout_.q_of(k), nq);
      const auto v0 = z.segment(layout_.v_of(k), nv);
      const auto v1 = z.segment(layout_.v_of(k + 1), nv);
      vdot = (v1 - v0) / p.schedule.dt[k];
      for (int c = 0; c < nc; ++c) forces[c] = z.segment<2>(layout_.f_of(k, c));
      std::span<double> out_span{out.data(), size_t(nv)};
      rbd::rnea_t<double>(model_, {q.data(), size_t(nq)}, {v0.data(), size_t(nv)},
                          {vdot.data(), size_t(nv)}, {forces.data(), forces.size()}, out_span,
                          frames);
      dyn_ws_[k].id = out;
    }
  }
}

template <class Emitter>
void Transcription::walk_rows(const Eigen::VectorXd& z, const NLPParameters& p,
                              Emitter& em) const {
  const DecisionLayout& L = layout_;
  const int N = L.N, nq = L.nq, nv = L.nv, nj = L.nj, nc = L.nc, np = L.np;

  // initial-condition pins
  for (int i = 0; i < nq; ++i) {
    em.row(L.row_init() + i);
    em.coeff(L.q_of(0) + i, 1.0);
    em.bounds(z[L.q_of(0) + i] - p.measured.q[i], 0.0, 0.0);
  }
  for (int i = 0; i < nv; ++i) {
    em.row(L.row_init() + nq + i);
    em.coeff(L.v_of(0) + i, 1.0);
    em.bounds(z[L.v_of(0) + i] - p.measured.v[i], 0.0, 0.0);
  }

  // trapezoidal integration defects
  for (int k = 0; k < N; ++k) {
    const double dt = p.schedule.dt[k];
    for (int i = 0; i < nq; ++i) {
      em.row(L.row_integration(k) + i);
      em.coeff(L.q_of(k) + i, -1.0);
      em.coeff(L.q_of(k + 1) + i, 1.0);
      em.coeff(L.v_of(k) + i, -0.5 * dt);
      em.coeff(L.v_of(k + 1) + i, -0.5 * dt);
      const double g = z[L.q_of(k + 1) + i] - z[L.q_of(k) + i] -
                       0.5 * dt * (z[L.v_of(k) + i] + z[L.v_of(k + 1) + i]);
      em.bounds(g, 0.0, 0.0);
    }
  }

  // inverse-dynamics defects: base rows everywhere, actuated rows early
  auto dyn_row = [&](int k, int r, int row_index) {
    em.row(row_index);
    const StageDyn& d = dyn_ws_[k];
    const StageKin& kin = kin_ws_[k];
    for (int i = 0; i < nq; ++i) em.coeff(L.q_of(k) + i, d.Jq(r, i));
    for (int i = 0; i < nv; ++i) em.coeff(L.v_of(k) + i, d.Jv0(r, i));
    for (int i = 0; i < nv; ++i) em.coeff(L.v_of(k + 1) + i, d.Jv1(r, i));
    for (int c = 0; c < nc; ++c) {
      // d(defect)/dF = -J_c^T; rows of J_c live in the kinematic pass
      em.coeff(L.f_of(k, c) + 0, -kin.vy_Jv(c, r));
      em.coeff(L.f_of(k, c) + 1, -kin.pz_Jq(c, r));
    }
    double g = d.id[r];
    if (r >= 3) {
      em.coeff(L.tau_of(k) + (r - 3), -1.0);
      g -= z[L.tau_of(k) + (r - 3)];
    }
    em.bounds(g, 0.0, 0.0);
  };
  for (int k = 0; k < N; ++k)
    for (int r = 0; r < 3; ++r) dyn_row(k, r, L.row_dyn_base(k) + r);
  for (int k = 0; k < L.torque_stages; ++k)
    for (int r = 3; r < nv; ++r) dyn_row(k, r, L.row_dyn_act(k) + (r - 3));

  // phase-switched force rows
  for (int k = 0; k < N; ++k)
    for (int c = 0; c < nc; ++c) {
      const double th = p.schedule.theta(c, k);
      const int fy = L.f_of(k, c), fz = fy + 1;
      const Eigen::Vector2d F{z[fy], z[fz]};
      const auto rows = force_row_values(F, th, p.mu);
      const int r0 = L.row_force(k, c);
      em.row(r0 + 0);
      em.coeff(fy, 1.0 - th);
      em.bounds(rows[0], 0.0, 0.0);
      em.row(r0 + 1);
      em.coeff(fz, 1.0 - th);
      em.bounds(rows[1], 0.0, 0.0);
      em.row(r0 + 2);
      em.coeff(fy, -th);
      em.coeff(fz, th * p.mu);
      em.bounds(rows[2], 0.0, kInf);
      em.row(r0 + 3);
      em.coeff(fy, th);
      em.coeff(fz, th * p.mu);
      em.bounds(rows[3], 0.0, kInf);
      em.row(r0 + 4);
      em.coeff(fz, th);
      em.bounds(rows[4], 0.0, kInf);
    }

  // contact-height equalities and stance no-slip rows
  for (int k = 1; k <= N; ++k) {
    const StageKin& kin = kin_ws_[k];
    for (int c = 0; c < nc; ++c) {
      em.row(L.row_height(k, c));
      for (int i = 0; i < nq; ++i) em.coeff(L.q_of(k) + i, kin.pz_Jq(c, i));
      em.bounds(kin.pz[c] - p.schedule.z_ref(c, k), 0.0, 0.0);

      const double th = p.schedule.theta(c, k);
      em.row(L.row_noslip(k, c));
      for (int i = 0; i < nq; ++i) em.coeff(L.q_of(k) + i, th * kin.vy_Jq(c, i));
      for (int i = 0; i < nv; ++i) em.coeff(L.v_of(k) + i, th * kin.vy_Jv(c, i));
      em.bounds(th * kin.vy[c], 0.0, 0.0);
    }
  }

  // joint/velocity/torque boxes
  for (int k = 1; k <= N; ++k)
    for (int j = 0; j < nj; ++j) {
      em.row(L.row_qbox(k) + j);
      em.coeff(L.q_of(k) + 3 + j, 1.0);
      em.bounds(z[L.q_of(k) + 3 + j], model_.q_min[j], model_.q_max[j]);
      em.row(L.row_vbox(k) + j);
      em.coeff(L.v_of(k) + 3 + j, 1.0);
      em.bounds(z[L.v_of(k) + 3 + j], -model_.v_max[j], model_.v_max[j]);
    }
  for (int k = 0; k < L.torque_stages; ++k)
    for (int j = 0; j < nj; ++j) {
      em.row(L.row_taubox(k) + j);
      em.coeff(L.tau_of(k) + j, 1.0);
      em.bounds(z[L.tau_of(k) + j], -model_.tau_max[j], model_.tau_max[j]);
    }

  // first-stage barrier-function rows (coefficients frozen at the measured
  // state); inert outside ConstraintWithCBF mode
  for (int pi = 0; pi < np; ++pi) {
    em.row(L.row_cbf() + pi);
    double g = 0.0;
    for (int i = 0; i < nv; ++i) {
      em.coeff(L.v_of(0) + i, cbf_ws_[pi].coeff_v0[i]);
      em.coeff(L.v_of(1) + i, cbf_ws_[pi].coeff_v1[i]);
      g += cbf_ws_[pi].coeff_v0[i] * z[L.v_of(0) + i] +
           cbf_ws_[pi].coeff_v1[i] * z[L.v_of(1) + i];
    }
    const double lo =
        p.collision_mode == CollisionMode::ConstraintWithCBF ? cbf_ws_[pi].lower : -kInf;
    em.bounds(g, lo, kInf);
  }

  // self-collision clearance rows; inert in barrier mode
  const double coll_lo = p.collision_mode == CollisionMode::RelaxedBarrier ? -kInf : 0.0;
  for (int k = 1; k <= N; ++k) {
    const StageKin& kin = kin_ws_[k];
    for (int pi = 0; pi < np; ++pi) {
      em.row(L.row_collision(k) + pi);
      for (int i = 0; i < nq; ++i) em.coeff(L.q_of(k) + i, kin.h_Jq(pi, i));
      em.bounds(kin.h[pi], coll_lo, kInf);
    }
  }
}

template <class Emitter>
void Transcription::walk_cost(const Eigen::VectorXd& z, const NLPParameters& p, Emitter& em,
                              double& cost, Eigen::VectorXd* grad) {
  const DecisionLayout& L = layout_;
  const int N = L.N, nj = L.nj, nc = L.nc, np = L.np;
  const CostWeights& w = p.weights;

  wdiag_.setZero();
  wlin_.setZero();
  double c0 = 0.0;
  auto add = [&](int idx, double weight, double target) {
    wdiag_[idx] += weight;
    wlin_[idx] -= weight * target;
    c0 += 0.5 * weight * target * target;
  };

  for (int k = 1; k <= N; ++k) {
    const double sc = (k == N) ? w.terminal_scale : 1.0;
    add(L.v_of(k) + 0, sc * w.velocity_tracking, p.v_cmd);
    add(L.q_of(k) + 1, sc * w.torso_height, p.torso_height_cmd);
    add(L.q_of(k) + 2, sc * w.base_pose, 0.0);
    add(L.v_of(k) + 1, sc * w.base_pose, 0.0);
    add(L.v_of(k) + 2, sc * w.base_pose, 0.0);
    for (int j = 0; j < nj; ++j) {
      add(L.q_of(k) + 3 + j, sc * w.joint, p.q_nominal[3 + j]);
      add(L.v_of(k) + 3 + j, sc * w.joint, 0.0);
    }
  }
  for (int k = 0; k < N; ++k) {
    for (int j = 0; j < nj; ++j) add(L.tau_of(k) + j, w.torque, 0.0);
    for (int c = 0; c < nc; ++c) {
      add(L.f_of(k, c) + 0, w.force, 0.0);
      add(L.f_of(k, c) + 1, w.force, 0.0);
    }
  }
  for (int j = 0; j < nj; ++j) add(L.tau_of(0) + j, w.dtau0, p.tau_prev[j]);

  cost = 0.5 * z.dot(wdiag_.cwiseProduct(z)) + wlin_.dot(z) + c0;
  if (grad) *grad = wdiag_.cwiseProduct(z) + wlin_;
  for (int i = 0; i < L.n_z; ++i) {
    em.row(i);
    em.coeff(i, wdiag_[i]);
  }

  // relaxed-barrier collision cost; the Hessian block is structural in every
  // mode so the pattern never changes
  const bool barrier = p.collision_mode == CollisionMode::RelaxedBarrier;
  for (int k = 1; k <= N; ++k) {
    const StageKin& kin = kin_ws_[k];
    for (int pi = 0; pi < np; ++pi) {
      double b2 = 0.0;
      if (barrier) {
        const double h = kin.h[pi];
        const double delta = w.barrier_delta, wb = w.barrier_weight;
        double b1;
        if (h > delta) {
          cost += -wb * std::log(h);
          b1 = -wb / h;
          b2 = wb / (h * h);
        } else {
          const double t = (h - 2.0 * delta) / delta;
          cost += wb * (0.5 * t * t - 0.5 - std::log(delta));
          b1 = wb * t / delta;
          b2 = wb / (delta * delta);
        }
        if (grad)
          for (const int i : pairs_[pi].support)
            (*grad)[L.q_of(k) + i] += b1 * kin.h_Jq(pi, i);
      }
      for (const int ci : pairs_[pi].support) {
        em.row(L.q_of(k) + ci);
        for (const int cj : pairs_[pi].support)
          em.coeff(L.q_of(k) + cj, b2 * kin.h_Jq(pi, ci) * kin.h_Jq(pi, cj));
      }
    }
  }
}

void Transcription::eval(const Eigen::VectorXd& z, const NLPParameters& params,
                         LinearizedNLP& out) {
  check_inputs(z, params);
  compute_stage_data<true>(z, params);

  if (!qp::same_pattern(out.qp.A, a_pattern_) || !qp::same_pattern(out.qp.H, h_pattern_)) {
    out.qp.A = a_pattern_;
    out.qp.H = h_pattern_;
  }
  out.G.resize(layout_.m_rows);
  out.L.resize(layout_.m_rows);
  out.U.resize(layout_.m_rows);

  std::fill(out.qp.A.valuePtr(), out.qp.A.valuePtr() + out.qp.A.nonZeros(), 0.0);
  ValueEmitter ve{out.qp.A.valuePtr(), &a_slots_, 0, &out.G, &out.L, &out.U, 0.0, 0};
  walk_rows(z, params, ve);
  out.violation = std::max(0.0, ve.violation);

  std::fill(out.qp.H.valuePtr(), out.qp.H.valuePtr() + out.qp.H.nonZeros(), 0.0);
  ValueEmitter he{out.qp.H.valuePtr(), &h_slots_, 0, nullptr, nullptr, nullptr, 0.0, 0};
  walk_cost(z, params, he, out.cost, &out.qp.g);

  out.qp.l = out.L - out.G;
  out.qp.u = out.U - out.G;
}

void Transcription::eval_point(const Eigen::VectorXd& z, const NLPParameters& params, double& cost,
                               double& violation) {
  check_inputs(z, params);
  compute_stage_data<false>(z, params);
  PointEmitter pe;
  walk_rows(z, params, pe);
  violation = std::max(0.0, pe.violation);
  NoopEmitter ne;
  walk_cost(z, params, ne, cost, nullptr);
}

void Transcription::write_report(std::ostream& os, const Eigen::VectorXd& z,
                                 const NLPParameters& params, const LinearizedNLP& lin) const {
  const DecisionLayout& L = layout_;
  os << "stages " << L.N << "  vars " << L.n_z << "  rows " << L.m_rows << "\n";
  os << "cost " << lin.cost << "  violation " << lin.violation << "\n";
  auto block_violation = [&](int r0, int count) {
    double worst = 0.0;
    for (int r = r0; r < r0 + count; ++r)
      worst = std::max({worst, lin.L[r] - lin.G[r], lin.G[r] - lin.U[r]});
    return std::max(0.0, worst);
  };
  os << "init rows [" << L.row_init() << "," << L.row_init() + L.nq + L.nv << ")  viol "
     << block_violation(L.row_init(), L.nq + L.nv) << "\n";
  for (int k = 0; k <= L.N; ++k) {
    os << "stage " << k << "  t+" << (k > 0 ? params.schedule.dt.head(k).sum() : 0.0) << "\n";
    os << "  q "; for (int i = 0; i < L.nq; ++i) os << z[L.q_of(k) + i] << ' ';
    os << "\n  v "; for (int i = 0; i < L.nv; ++i) os << z[L.v_of(k) + i] << ' ';
    os << "\n";
    if (k < L.N) {
      os << "  tau "; for (int j = 0; j < L.nj; ++j) os << z[L.tau_of(k) + j] << ' ';
      os << "\n  F "; for (int c = 0; c < L.nc; ++c)
        os << "(" << z[L.f_of(k, c)] << ", " << z[L.f_of(k, c) + 1] << ") ";
      os << "\n  theta "; for (int c = 0; c < L.nc; ++c) os << params.schedule.theta(c, k) << ' ';
      os << "\n  integration viol " << block_violation(L.row_integration(k), L.nq)
         << "  dynamics viol " << block_violation(L.row_dyn_base(k), 3) << "\n";
    }
    if (k >= 1) {
      os << "  height/noslip viol " << block_violation(L.row_height(k, 0), L.nc) << " / "
         << block_violation(L.row_noslip(k, 0), L.nc)
         << "  collision h ";
      for (int pi = 0; pi < L.np; ++pi) os << lin.G[L.row_collision(k) + pi] << ' ';
      os << "\n";
    }
  }
}

}  // namespace wbnmpc::ocp
