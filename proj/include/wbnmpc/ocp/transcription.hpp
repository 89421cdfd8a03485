#pragma once

#include "wbnmpc/ocp/layout.hpp"
#include "wbnmpc/ocp/schedule.hpp"
#include "wbnmpc/qp/admm.hpp"
#include "wbnmpc/rbd/dynamics.hpp"

#include <iosfwd>

namespace wbnmpc::ocp {

struct CostWeights {
  double velocity_tracking = 10.0;  ///< base lateral velocity vs command
  double torso_height = 100.0;      ///< base height vs command
  double base_pose = 1.0;           ///< roll angle, vertical/roll velocity
  double joint = 0.1;               ///< joint angles to nominal, joint velocities to 0
  double torque = 1e-3;
  double force = 1e-4;
  double dtau0 = 1e-2;              ///< ||tau_0 - tau_prev||^2 smoothing
  double terminal_scale = 10.0;     ///< multiplier on state weights at k = N
  double barrier_weight = 100.0;    ///< relaxed-barrier collision mode only
  double barrier_delta = 0.01;      ///< m, relaxation threshold of the barrier
};

/// How inter-foot collision avoidance enters the problem. The constraint row
/// blocks exist in the layout for every mode; unused rows get infinite bounds
/// so the sparsity pattern never changes.
enum class CollisionMode {
  Constraint,         ///< h(q_k) >= 0 rows at k = 1..N
  ConstraintWithCBF,  ///< same, plus the barrier-function acceleration row at k = 0
  RelaxedBarrier      ///< no hard rows; relaxed log-barrier cost on h(q_k)
};

struct NLPParameters {
  rbd::State measured;
  double v_cmd = 0.0;               ///< m/s lateral base velocity command
  double torso_height_cmd = 0.48;   ///< m
  ContactSchedule schedule;
  double mu = 0.7;
  double alpha1 = 10.0, alpha2 = 10.0;  ///< 1/s, barrier-row gains
  Eigen::VectorXd tau_prev;         ///< nj, previous first-stage torque
  Eigen::VectorXd q_nominal;        ///< nq, posture regularization target
  CostWeights weights;
  CollisionMode collision_mode = CollisionMode::ConstraintWithCBF;
};

/// Linearization of the NLP at an iterate z: the step QP
///   min ½ dᵀH d + gradᵀd   s.t.   L − G ≤ ∇G d ≤ U − G
/// packaged as a QPProblem, alongside the raw constraint values/bounds and
/// scalar diagnostics of the iterate itself. Reused across evals as the
/// caller-owned workspace.
struct LinearizedNLP {
  qp::QPProblem qp;
  Eigen::VectorXd G, L, U;
  double cost = 0.0;
  double violation = 0.0;  ///< ∞-norm of the bound violation of G
};

// --- standalone row computations (the building blocks of eval) ---

/// Trapezoidal integration defect q1 − q0 − ½(v0 + v1)·dt.
Eigen::VectorXd integration_residual(const Eigen::VectorXd& q0, const Eigen::VectorXd& v0,
                                     const Eigen::VectorXd& q1, const Eigen::VectorXd& v1,
                                     double dt);

/// Inverse-dynamics defect with finite-difference acceleration (v1 − v0)/dt:
/// rows 0..2 are the floating-base wrench, rows 3.. subtract tau.
Eigen::VectorXd dynamics_residual(const rbd::ModelSpec& model, const Eigen::VectorXd& q0,
                                  const Eigen::VectorXd& v0, const Eigen::VectorXd& v1,
                                  const Eigen::VectorXd& tau,
                                  const std::vector<Eigen::Vector2d>& forces, double dt);

/// Values of the five phase-switched force rows for one contact:
/// (1−θ)F_y, (1−θ)F_z, θ(μF_z − F_y), θ(μF_z + F_y), θF_z.
Eigen::Matrix<double, 5, 1> force_row_values(const Eigen::Vector2d& F, double theta, double mu);

/// First-stage collision-avoidance row, linear in the decision variables by
/// construction: all coefficients are evaluated at the measured state, and
/// the contact-separation acceleration enters through (v1 − v0)/dt0.
struct CBFRow {
  Eigen::VectorXd coeff_v0;  ///< nv
  Eigen::VectorXd coeff_v1;  ///< nv
  double lower = 0.0;        ///< row is coeff_v0·v0 + coeff_v1·v1 >= lower
};
std::vector<CBFRow> cbf_rows(const rbd::ModelSpec& model, const rbd::State& measured,
                             double alpha1, double alpha2, double dt0);

/// Builds and evaluates the full NLP. Construction fixes the sparsity
/// patterns of H and the constraint Jacobian once; eval refreshes values in
/// place through precomputed slot maps. One instance per control loop;
/// instances share nothing.
class Transcription {
 public:
  Transcription(rbd::ModelSpec model, int N, int torque_stages = 2);

  const DecisionLayout& layout() const { return layout_; }
  const rbd::ModelSpec& model() const { return model_; }
  const qp::SpMat& jacobian_pattern() const { return a_pattern_; }
  const qp::SpMat& hessian_pattern() const { return h_pattern_; }

  /// Full linearization. Throws std::invalid_argument on a non-finite
  /// iterate or mismatched parameter sizes.
  void eval(const Eigen::VectorXd& z, const NLPParameters& params, LinearizedNLP& out);

  /// Cost and constraint violation only — the cheap path for line searches.
  void eval_point(const Eigen::VectorXd& z, const NLPParameters& params, double& cost,
                  double& violation);

  /// Stage-annotated text report of an evaluated iterate, for debugging.
  void write_report(std::ostream& os, const Eigen::VectorXd& z, const NLPParameters& params,
                    const LinearizedNLP& lin) const;

 private:
  struct PairInfo {
    int left = -1, right = -1;  ///< contact indices
    double margin = 0.0;
    std::vector<int> support;   ///< q columns h can structurally depend on
  };
  struct StageKin {
    Eigen::VectorXd pz, vy;               // per contact
    Eigen::MatrixXd pz_Jq, vy_Jq, vy_Jv;  // rows per contact
    Eigen::VectorXd h;                    // per pair
    Eigen::MatrixXd h_Jq;
  };
  struct StageDyn {
    Eigen::VectorXd id;            // nv defect values
    Eigen::MatrixXd Jq, Jv0, Jv1;  // nv x nv
  };

  void check_inputs(const Eigen::VectorXd& z, const NLPParameters& params) const;
  template <bool derivs>
  void compute_stage_data(const Eigen::VectorXd& z, const NLPParameters& params);
  template <class Emitter>
  void walk_rows(const Eigen::VectorXd& z, const NLPParameters& params, Emitter& em) const;
  template <class Emitter>
  void walk_cost(const Eigen::VectorXd& z, const NLPParameters& params, Emitter& em,
                 double& cost, Eigen::VectorXd* grad);

  rbd::ModelSpec model_;
  DecisionLayout layout_;
  std::vector<PairInfo> pairs_;
  qp::SpMat a_pattern_;
  qp::SpMat h_pattern_;
  std::vector<Eigen::Index> a_slots_;  // emission order -> value slot
  std::vector<Eigen::Index> h_slots_;

  // per-eval scratch
  std::vector<StageKin> kin_ws_;   // k = 0..N
  std::vector<StageDyn> dyn_ws_;   // k = 0..N-1
  std::vector<CBFRow> cbf_ws_;
  Eigen::VectorXd wdiag_, wlin_;   // diagonal cost assembly
};

}  // namespace wbnmpc::ocp
