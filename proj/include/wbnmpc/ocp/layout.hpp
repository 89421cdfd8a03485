#pragma once

#include "wbnmpc/rbd/model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace wbnmpc::ocp {

/// Index map of the decision vector and constraint rows for an N-stage
/// problem. Variables are stage-major:
///   [q_0 v_0 tau_0 F_{0,0} F_{1,0} | q_1 v_1 tau_1 F_{.,1} | ... | q_N v_N]
/// with nq positions, nv velocities, nj torques and one planar force pair per
/// contact. Rows are grouped by block type (see the row_* accessors); the
/// layout depends only on the model dimensions and N, never on schedule or
/// iterate values.
struct DecisionLayout {
  int N = 0;
  int nq = 0, nv = 0, nj = 0, nc = 0, np = 0;
  int torque_stages = 2;  ///< stages with torque boxes and actuated dynamics rows
  int stage_stride = 0;   ///< nq + nv + nj + 2*nc
  int n_z = 0;
  int m_rows = 0;

  // --- variable offsets ---
  int q_of(int k) const { return k * stage_stride; }
  int v_of(int k) const { return q_of(k) + nq; }
  int tau_of(int k) const { return v_of(k) + nv; }          // k < N
  int f_of(int k, int c) const { return tau_of(k) + nj + 2 * c; }  // k < N

  // --- row offsets (block-major) ---
  int row_init() const { return 0; }                          // nq + nv rows
  int row_integration(int k) const;                           // nq rows, k < N
  int row_dyn_base(int k) const;                              // 3 rows, k < N
  int row_dyn_act(int k) const;                               // nj rows, k < torque_stages
  int row_force(int k, int c) const;                          // 5 rows, k < N
  int row_height(int k, int c) const;                         // 1 row, k = 1..N
  int row_noslip(int k, int c) const;                         // 1 row, k = 1..N
  int row_qbox(int k) const;                                  // nj rows, k = 1..N
  int row_vbox(int k) const;                                  // nj rows, k = 1..N
  int row_taubox(int k) const;                                // nj rows, k < torque_stages
  int row_cbf() const;                                        // np rows, at k = 0
  int row_collision(int k) const;                             // np rows, k = 1..N

  // block starts, exposed for the stage report
  int integ0 = 0, dynb0 = 0, dyna0 = 0, force0 = 0, height0 = 0, noslip0 = 0;
  int qbox0 = 0, vbox0 = 0, taubox0 = 0, cbf0 = 0, coll0 = 0;
};

DecisionLayout build_layout(const rbd::ModelSpec& model, int N, int torque_stages = 2);

/// Decoded view of a decision vector.
struct Trajectory {
  std::vector<Eigen::VectorXd> q;   // N+1
  std::vector<Eigen::VectorXd> v;   // N+1
  std::vector<Eigen::VectorXd> tau; // N
  std::vector<std::vector<Eigen::Vector2d>> force;  // [k][c], N stages
};

Trajectory decode(const DecisionLayout& lay, const Eigen::VectorXd& z);
Eigen::VectorXd encode(const DecisionLayout& lay, const Trajectory& traj);

}  // namespace wbnmpc::ocp
