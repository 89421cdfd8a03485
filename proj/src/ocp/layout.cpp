#include "wbnmpc/ocp/layout.hpp"

#include <stdexcept>

namespace wbnmpc::ocp {

int DecisionLayout::row_integration(int k) const { return integ0 + k * nq; }
int DecisionLayout::row_dyn_base(int k) const { return dynb0 + k * 3; }
int DecisionLayout::row_dyn_act(int k) const { return dyna0 + k * nj; }
int DecisionLayout::row_force(int k, int c) const { return force0 + (k * nc + c) * 5; }
int DecisionLayout::row_height(int k, int c) const { return height0 + ((k - 1) * nc + c); }
int DecisionLayout::row_noslip(int k, int c) const { return noslip0 + ((k - 1) * nc + c); }
int DecisionLayout::row_qbox(int k) const { return qbox0 + (k - 1) * nj; }
int DecisionLayout::row_vbox(int k) const { return vbox0 + (k - 1) * nj; }
int DecisionLayout::row_taubox(int k) const { return taubox0 + k * nj; }
int DecisionLayout::row_cbf() const { return cbf0; }
int DecisionLayout::row_collision(int k) const { return coll0 + (k - 1) * np; }

DecisionLayout build_layout(const rbd::ModelSpec& model, int N, int torque_stages) {
  if (N < 2) throw std::invalid_argument("build_layout: N must be at least 2");
  if (torque_stages < 1 || torque_stages > N)
    throw std::invalid_argument("build_layout: torque_stages must lie in [1, N]");

  DecisionLayout lay;
  lay.N = N;
  lay.nq = model.nq();
  lay.nv = model.nv();
  lay.nj = model.nj();
  lay.nc = model.num_contacts();
  lay.np = static_cast<int>(model.collision_pairs.size());
  lay.torque_stages = torque_stages;
  lay.stage_stride = lay.nq + lay.nv + lay.nj + 2 * lay.nc;
  lay.n_z = N * lay.stage_stride + lay.nq + lay.nv;

  int r = lay.nq + lay.nv;  // init rows occupy [0, nq+nv)
  lay.integ0 = r;  r += N * lay.nq;
  lay.dynb0 = r;   r += N * 3;
  lay.dyna0 = r;   r += torque_stages * lay.nj;
  lay.force0 = r;  r += N * lay.nc * 5;
  lay.height0 = r; r += N * lay.nc;
  lay.noslip0 = r; r += N * lay.nc;
  lay.qbox0 = r;   r += N * lay.nj;
  lay.vbox0 = r;   r += N * lay.nj;
  lay.taubox0 = r; r += torque_stages * lay.nj;
  lay.cbf0 = r;    r += lay.np;
  lay.coll0 = r;   r += N * lay.np;
  lay.m_rows = r;
  return lay;
}

Trajectory decode(const DecisionLayout& lay, const Eigen::VectorXd& z) {
  if (z.size() != lay.n_z) throw std::invalid_argument("decode: size mismatch");
  Trajectory t;
  t.q.resize(lay.N + 1);
  t.v.resize(lay.N + 1);
  t.tau.resize(lay.N);
  t.force.resize(lay.N);
  for (int k = 0; k <= lay.N; ++k) {
    t.q[k] = z.segment(lay.q_of(k), lay.nq);
    t.v[k] = z.segment(lay.v_of(k), lay.nv);
    if (k < lay.N) {
      t.tau[k] = z.segment(lay.tau_of(k), lay.nj);
      t.force[k].resize(lay.nc);
      for (int c = 0; c < lay.nc; ++c) t.force[k][c] = z.segment<2>(lay.f_of(k, c));
    }
  }
  return t;
}

Eigen::VectorXd encode(const DecisionLayout& lay, const Trajectory& traj) {
  Eigen::VectorXd z(lay.n_z);
  for (int k = 0; k <= lay.N; ++k) {
    z.segment(lay.q_of(k), lay.nq) = traj.q.at(k);
    z.segment(lay.v_of(k), lay.nv) = traj.v.at(k);
    if (k < lay.N) {
      z.segment(lay.tau_of(k), lay.nj) = traj.tau.at(k);
      for (int c = 0; c < lay.nc; ++c) z.segment<2>(lay.f_of(k, c)) = traj.force.at(k).at(c);
    }
  }
  return z;
}

}  // namespace wbnmpc::ocp
