#pragma once

#include "wbnmpc/ocp/transcription.hpp"

#include <functional>
#include <string>

namespace wbnmpc::ocp {

struct LinesearchSettings {
  int max_backtracks = 5;
  double shrink = 0.5;                 ///< multiplies the step on rejection
  double min_step = 1.0 / 32.0;        ///< fall-through step when nothing passes
  double armijo = 1e-4;                ///< sufficient-decrease factor on the cost
  double violation_margin = 1e-6;      ///< absolute violation decrease that accepts alone
  double violation_acceptable = 1e-4;  ///< below this, the cost test decides
  void validate() const;               ///< throws std::invalid_argument
};

struct SQPSettings {
  int iterations_per_instant = 1;  ///< Gauss-Newton steps per control instant
  qp::ADMMSettings admm;
  LinesearchSettings linesearch;
  double control_period = 0.025;  ///< s between instants in closed loop
  void validate() const;
};

struct SolveDiagnostics {
  double cost = 0.0;            ///< at the returned iterate
  double violation = 0.0;       ///< ∞-norm bound violation at the returned iterate
  double beta = 0.0;            ///< accepted step length of the last iteration
  double primal_residual = 0.0; ///< of the last QP solve
  double dual_residual = 0.0;
  int admm_iterations = 0;
  int sqp_iterations = 0;
  bool fallback = false;  ///< QP produced no usable step, or only the minimum step passed
  double solve_seconds = 0.0;
};

/// One control instant's output: the updated trajectory iterate, the
/// constraint duals to carry into the next instant, and diagnostics.
struct TrajectorySolution {
  Eigen::VectorXd z;
  Eigen::VectorXd y;
  SolveDiagnostics diag;
  double timestamp = 0.0;  ///< time of the measured state this was solved from
};

/// Accepts the first trial step where either the constraint violation drops
/// by an absolute margin, or the iterate is near-feasible and the cost passes
/// an Armijo decrease against `directional_derivative` (the cost slope along
/// the step). `trial` maps a step length to (cost, violation) at z + β d.
struct LinesearchOutcome {
  double beta = 1.0;
  double cost = 0.0;       ///< at the accepted point
  double violation = 0.0;
  bool hit_min_step = false;
};
LinesearchOutcome filter_linesearch(
    double cost0, double violation0, double directional_derivative,
    const LinesearchSettings& settings,
    const std::function<std::pair<double, double>(double)>& trial);

/// Shifted initial guess for the next control instant.
struct ShiftedStart {
  Eigen::VectorXd z;
  Eigen::VectorXd y;         ///< duals, carried without shifting
  Eigen::VectorXd tau_prev;  ///< torque in effect now, for the first-stage rate penalty
};

/// Time-shifts a solved trajectory by `elapsed` seconds via piecewise-linear
/// interpolation on the stage grid (terminal stage repeated past the
/// horizon), pins the first state block to the newly measured state, and
/// zeroes contact forces on intervals the new schedule marks as swing.
ShiftedStart shift_and_warmstart(const DecisionLayout& lay, const TrajectorySolution& prev,
                                 double elapsed, const NLPParameters& new_params);

/// Feedforward/setpoint sample of a solved trajectory at `delay` seconds
/// ahead of its first stage, compensating computation-and-transport delay.
/// Samples beyond the horizon clamp to the terminal stage and set `clamped`.
struct ControlSample {
  Eigen::VectorXd q_des;
  Eigen::VectorXd v_des;
  Eigen::VectorXd tau_ff;
  bool clamped = false;
};
ControlSample compensate_delay(const DecisionLayout& lay, const Eigen::VectorXd& z,
                               const Eigen::VectorXd& dt, double delay);

/// CSV diagnostics, one line per control instant.
std::string diagnostics_csv_header();
std::string diagnostics_csv_line(double time, const SolveDiagnostics& d);

/// Real-time-iteration driver: owns the transcription and one persistent QP
/// solver handle so the KKT symbolic analysis is reused across every instant
/// of a run. One instance per control loop; an instance may move between
/// threads but must be used by one thread at a time.
class SQPDriver {
 public:
  SQPDriver(rbd::ModelSpec model, int N, int torque_stages = 2);

  /// Runs `settings.iterations_per_instant` Gauss-Newton iterations from
  /// iterate z0 with dual warm start y0 (empty → zeros). QP inaccuracy never
  /// throws: non-finite QP output falls back to β = 0 for that iteration and
  /// flags the instant. Invalid inputs still throw std::invalid_argument.
  TrajectorySolution step(const Eigen::VectorXd& z0, const Eigen::VectorXd& y0,
                          const NLPParameters& params, const SQPSettings& settings,
                          double timestamp = 0.0);

  Transcription& transcription() { return tr_; }
  const DecisionLayout& layout() const { return tr_.layout(); }
  int symbolic_analysis_count() const { return solver_.symbolic_analysis_count(); }

  /// Linearization at the point the last QP was built from (the iterate
  /// before the final accepted step). Valid after the first step() call.
  const LinearizedNLP& last_linearization() const { return lin_; }

 private:
  Transcription tr_;
  qp::SolverHandle solver_;
  LinearizedNLP lin_;
  bool solver_ready_ = false;
  qp::ADMMSettings active_admm_;
};

}  // namespace wbnmpc::ocp
