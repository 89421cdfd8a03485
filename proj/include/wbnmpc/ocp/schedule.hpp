#pragma once

#include <Eigen/Dense>

namespace wbnmpc::ocp {

/// Per-contact, per-stage gait data consumed by the transcription. theta is a
/// 0/1 stance flag and z_ref the commanded contact height (0 in stance, a
/// swing profile otherwise). Nodes run k = 0..N, intervals k = 0..N-1; both
/// index the same columns, so theta/z_ref carry N+1 columns.
struct ContactSchedule {
  int N = 0;
  Eigen::VectorXd dt;      ///< N interval durations, summing to the horizon
  Eigen::MatrixXd theta;   ///< num_contacts x (N+1), each entry 0 or 1
  Eigen::MatrixXd z_ref;   ///< num_contacts x (N+1), meters

  int num_contacts() const { return static_cast<int>(theta.rows()); }
  double total_time() const { return dt.size() ? dt.sum() : 0.0; }
  void validate() const;  ///< throws std::invalid_argument on broken invariants
};

enum class GaitType { Stand, StepInPlace, LateralWalk };

struct GaitSpec {
  GaitType type = GaitType::Stand;
  double period = 0.7;      ///< s, full gait cycle
  double duty = 0.5;        ///< stance fraction of the cycle
  double swing_apex = 0.05; ///< m, peak of the half-sine swing profile
};

/// Builds the schedule seen from absolute time t0: uniform dt = T/N, feet
/// offset by half a cycle, stance/swing decided by the phase at each stage
/// midpoint (the terminal node samples at t0 + T). Lateral walking uses the
/// same alternating-support pattern as stepping in place; the lateral motion
/// itself comes from the velocity command in the cost.
ContactSchedule make_gait(const GaitSpec& gait, int num_contacts, int N, double T, double t0);

}  // namespace wbnmpc::ocp
