#pragma once

#include "wbnmpc/qp/sparse.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <iosfwd>
#include <optional>
#include <vector>

namespace wbnmpc::qp {

/// Convex QP with two-sided linear constraints:
///   min ½ xᵀH x + gᵀx   s.t.   l ≤ A x ≤ u.
/// H must be symmetric positive semidefinite (stored full, both triangles).
/// Rows with l = u act as equalities; ±infinity disables a side.
struct QPProblem {
  SpMat H;
  Eigen::VectorXd g;
  SpMat A;
  Eigen::VectorXd l;
  Eigen::VectorXd u;

  Eigen::Index num_vars() const { return H.rows(); }
  Eigen::Index num_rows() const { return A.rows(); }

  /// Checks dimensions, l ≤ u, and that g/l/u contain no NaN. Throws
  /// std::invalid_argument. Positive semidefiniteness is not checked here.
  void validate() const;
};

struct ADMMSettings {
  double rho = 0.1;            ///< base penalty on constraint rows
  double rho_eq_scale = 1e3;   ///< multiplier on rows with l = u
  double sigma = 1e-6;         ///< primal regularization in the KKT matrix
  double alpha_relax = 1.6;    ///< over-relaxation, in (0, 2)

  enum class Mode {
    FixedIterations,     ///< run exactly max_iterations, report final residuals
    ResidualTolerance  ///< stop once both residuals pass the tolerances
  };
  Mode mode = Mode::FixedIterations;
  int max_iterations = 200;
  double eps_abs = 1e-8;
  double eps_rel = 1e-8;

  /// Penalty adaptation, active in residual-tolerance mode only: every
  /// `adaptive_rho_interval` iterations the penalty is rescaled by
  /// sqrt((primal residual / primal threshold) / (dual residual / dual
  /// threshold)) when that imbalance exceeds `adaptive_rho_tolerance`,
  /// followed by a numeric refactorization. Stiffens the penalty while the
  /// primal test lags and relaxes it while the dual test lags. Fixed-iteration
  /// mode never adapts: its per-instant cost must stay at one factorization
  /// plus cheap iterations. 0 disables adaptation entirely.
  int adaptive_rho_interval = 50;
  double adaptive_rho_tolerance = 1.5;

  /// Rounds of symmetric (Ruiz) equilibration applied to the problem data at
  /// setup/update time; 0 leaves the problem untouched. Scale factors are
  /// rounded to powers of two, so mapping iterates between the scaled and
  /// original problem is exact. Residuals and results are always reported in
  /// original units.
  int scaling_iterations = 0;

  void validate() const;  ///< throws std::invalid_argument on bad values
};

enum class SolveStatus { IterationCapped, Converged };

struct ADMMResult {
  Eigen::VectorXd x;       ///< primal solution
  Eigen::VectorXd y;       ///< dual multipliers of the constraint rows
  Eigen::VectorXd z;       ///< projected constraint values, always in [l, u]
  int iterations = 0;
  double primal_residual = 0.0;  ///< ‖Ax − z‖∞ at exit
  double dual_residual = 0.0;    ///< ‖Hx + g + Aᵀy‖∞ at exit
  SolveStatus status = SolveStatus::IterationCapped;
};

/// Optional initial iterate. z is derived internally by projecting A·x onto
/// the bounds, so only the primal/dual pair is supplied.
struct WarmStart {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

/// Operator-splitting QP solver. setup() factors the quasi-definite KKT
/// matrix [[H+σI, Aᵀ], [A, −diag(1/ρ)]] once with a fill-reducing ordering;
/// update_values() refactors numerically while reusing the symbolic analysis
/// as long as the sparsity patterns of H and A are unchanged. Each solve()
/// then runs cheap iterations against the cached factorization.
///
/// A handle is single-owner during solve; distinct handles are independent.
class SolverHandle {
 public:
  SolverHandle() = default;

  /// Factors the KKT system. Reuses the cached symbolic analysis when the
  /// pattern matches the previously set-up problem.
  void setup(const QPProblem& problem, const ADMMSettings& settings);

  /// Swaps in new values for a problem with identical H/A patterns.
  /// Throws std::invalid_argument when the pattern differs.
  void update_values(const QPProblem& problem);

  /// Runs the ADMM iteration, cold-started or from a previous solution.
  /// Throws std::runtime_error naming the iteration when iterates go
  /// non-finite.
  ADMMResult solve() const;
  ADMMResult solve(const WarmStart& warm) const;

  /// Number of symbolic analyses performed over the handle's lifetime.
  int symbolic_analysis_count() const { return analysis_count_; }

  /// Direct KKT solve, exposed for diagnostics and factorization tests.
  Eigen::VectorXd kkt_solve(const Eigen::VectorXd& rhs) const;

  const QPProblem& problem() const { return problem_; }
  const ADMMSettings& settings() const { return settings_; }

 private:
  void assemble_and_factor();
  void equilibrate();
  void factor() const;
  void set_rho_scale(double scale) const;
  ADMMResult run(std::optional<WarmStart> warm) const;

  QPProblem problem_;  // original, unscaled data as handed in
  ADMMSettings settings_;

  // Equilibrated copy the iteration actually runs on, together with the
  // power-of-two diagonal scalings mapping it back:
  //   scaled.H = c D H D, scaled.g = c D g, scaled.A = E A D,
  //   scaled.l/u = E l/u, and iterates map as x = D xs, y = E ys / c,
  //   z = zs / E. With scaling_iterations == 0 all factors are one.
  QPProblem scaled_;
  Eigen::VectorXd d_scale_;  // size n
  Eigen::VectorXd e_scale_;  // size m
  double cost_scale_ = 1.0;

  // Mutable pieces below are the penalty state touched by residual-mode rho
  // adaptation inside solve(). Every solve() starts from the configured base
  // penalty, so results stay deterministic and independent of prior calls;
  // the handle remains single-owner during solve either way.
  mutable Eigen::VectorXd rho_;      // per-row penalty
  mutable Eigen::VectorXd rho_inv_;
  mutable double rho_scale_ = 1.0;

  mutable SpMat kkt_;                             // upper triangle
  std::vector<Eigen::Index> slots_;               // canonical entry -> kkt slot
  mutable Eigen::SimplicialLDLT<SpMat, Eigen::Upper> ldlt_;
  bool analyzed_ = false;
  int analysis_count_ = 0;
};

/// Plain-text dump of a full problem (H, g, A, l, u) for offline debugging;
/// sparse blocks use the triplet format of dump_triplets.
void dump_problem(std::ostream& os, const QPProblem& p);
QPProblem load_problem(std::istream& is);

}  // namespace wbnmpc::qp
