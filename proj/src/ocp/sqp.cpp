#include "wbnmpc/ocp/sqp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace wbnmpc::ocp {

namespace {

bool same_admm(const qp::ADMMSettings& a, const qp::ADMMSettings& b) {
  return a.rho == b.rho && a.rho_eq_scale == b.rho_eq_scale && a.sigma == b.sigma &&
         a.alpha_relax == b.alpha_relax && a.mode == b.mode &&
         a.max_iterations == b.max_iterations && a.eps_abs == b.eps_abs &&
         a.eps_rel == b.eps_rel && a.adaptive_rho_interval == b.adaptive_rho_interval &&
         a.adaptive_rho_tolerance == b.adaptive_rho_tolerance;
}

/// Piecewise-linear sample of per-node values (columns of `at`, N+1 nodes) at
/// time t on the grid given by dt; clamps to the last node beyond the horizon.
Eigen::VectorXd sample_nodes(const std::vector<Eigen::VectorXd>& nodes,
                             const Eigen::VectorXd& dt, double t, bool* clamped = nullptr) {
  const int n_int = static_cast<int>(dt.size());
  if (t <= 0.0) return nodes.front();
  double t0 = 0.0;
  for (int j = 0; j < n_int; ++j) {
    if (t < t0 + dt[j]) {
      const double s = (t - t0) / dt[j];
      return (1.0 - s) * nodes[j] + s * nodes[j + 1];
    }
    t0 += dt[j];
  }
  if (clamped) *clamped = true;
  return nodes.back();
}

}  // namespace

void LinesearchSettings::validate() const {
  if (max_backtracks < 0) throw std::invalid_argument("linesearch: negative backtrack count");
  if (!(shrink > 0.0 && shrink < 1.0))
    throw std::invalid_argument("linesearch: shrink must lie in (0, 1)");
  if (!(min_step > 0.0 && min_step <= 1.0))
    throw std::invalid_argument("linesearch: min_step must lie in (0, 1]");
  if (!(armijo > 0.0 && armijo < 1.0))
    throw std::invalid_argument("linesearch: armijo factor must lie in (0, 1)");
  if (!(violation_margin > 0.0) || !(violation_acceptable > 0.0))
    throw std::invalid_argument("linesearch: margins must be positive");
}

void SQPSettings::validate() const {
  if (iterations_per_instant < 1)
    throw std::invalid_argument("sqp: need at least one iteration per instant");
  if (!(control_period > 0.0)) throw std::invalid_argument("sqp: control period must be positive");
  admm.validate();
  linesearch.validate();
}

LinesearchOutcome filter_linesearch(
    double cost0, double violation0, double directional_derivative,
    const LinesearchSettings& settings,
    const std::function<std::pair<double, double>(double)>& trial) {
  settings.validate();
  double beta = 1.0;
  for (int attempt = 0; attempt <= settings.max_backtracks; ++attempt) {
    const auto [cost, violation] = trial(beta);
    const bool violation_drop = violation < violation0 - settings.violation_margin;
    const bool armijo_ok =
        violation <= settings.violation_acceptable &&
        cost <= cost0 + settings.armijo * beta * directional_derivative;
    if (violation_drop || armijo_ok) return {beta, cost, violation, false};
    if (beta <= settings.min_step) return {settings.min_step, cost, violation, true};
    beta = std::max(beta * settings.shrink, settings.min_step);
  }
  const auto [cost, violation] = trial(settings.min_step);
  return {settings.min_step, cost, violation, true};
}

ShiftedStart shift_and_warmstart(const DecisionLayout& lay, const TrajectorySolution& prev,
                                 double elapsed, const NLPParameters& new_params) {
  if (!(elapsed >= 0.0)) throw std::invalid_argument("shift: elapsed must be non-negative");
  if (prev.z.size() != lay.n_z) throw std::invalid_argument("shift: iterate size mismatch");
  const Eigen::VectorXd& dt = new_params.schedule.dt;
  if (static_cast<int>(dt.size()) != lay.N)
    throw std::invalid_argument("shift: schedule/layout stage mismatch");

  const int N = lay.N;
  std::vector<Eigen::VectorXd> qn(N + 1), vn(N + 1), un(N);
  for (int k = 0; k <= N; ++k) {
    qn[k] = prev.z.segment(lay.q_of(k), lay.nq);
    vn[k] = prev.z.segment(lay.v_of(k), lay.nv);
  }
  // inputs live on intervals; treat them as node values at interval starts
  for (int k = 0; k < N; ++k) un[k] = prev.z.segment(lay.tau_of(k), lay.nj + 2 * lay.nc);

  ShiftedStart out;
  out.z.resize(lay.n_z);
  double t_node = 0.0;
  for (int k = 0; k <= N; ++k) {
    out.z.segment(lay.q_of(k), lay.nq) = sample_nodes(qn, dt, t_node + elapsed);
    out.z.segment(lay.v_of(k), lay.nv) = sample_nodes(vn, dt, t_node + elapsed);
    if (k < N) {
      out.z.segment(lay.tau_of(k), lay.nj + 2 * lay.nc) =
          sample_nodes(un, dt.head(N - 1), t_node + elapsed);
      t_node += dt[k];
    }
  }
  out.z.segment(lay.q_of(0), lay.nq) = new_params.measured.q;
  out.z.segment(lay.v_of(0), lay.nv) = new_params.measured.v;
  for (int k = 0; k < N; ++k)
    for (int c = 0; c < lay.nc; ++c)
      if (new_params.schedule.theta(c, k) == 0.0) out.z.segment<2>(lay.f_of(k, c)).setZero();

  out.y = prev.y;
  out.tau_prev = sample_nodes(un, dt.head(N - 1), elapsed).head(lay.nj);
  return out;
}

ControlSample compensate_delay(const DecisionLayout& lay, const Eigen::VectorXd& z,
                               const Eigen::VectorXd& dt, double delay) {
  if (!(delay >= 0.0)) throw std::invalid_argument("delay compensation: negative delay");
  if (z.size() != lay.n_z) throw std::invalid_argument("delay compensation: iterate size");
  if (static_cast<int>(dt.size()) != lay.N)
    throw std::invalid_argument("delay compensation: stage grid size");

  const int N = lay.N;
  std::vector<Eigen::VectorXd> qn(N + 1), vn(N + 1), taun(N);
  for (int k = 0; k <= N; ++k) {
    qn[k] = z.segment(lay.q_of(k), lay.nq);
    vn[k] = z.segment(lay.v_of(k), lay.nv);
  }
  for (int k = 0; k < N; ++k) taun[k] = z.segment(lay.tau_of(k), lay.nj);

  ControlSample out;
  out.q_des = sample_nodes(qn, dt, delay, &out.clamped);
  out.v_des = sample_nodes(vn, dt, delay, &out.clamped);
  out.tau_ff = sample_nodes(taun, dt.head(N - 1), delay);
  return out;
}

std::string diagnostics_csv_header() {
  return "time,cost,violation,beta,primal_residual,dual_residual,admm_iterations,"
         "sqp_iterations,fallback,solve_seconds";
}

std::string diagnostics_csv_line(double time, const SolveDiagnostics& d) {
  char buf[360];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,%d,%.17g", time,
                d.cost, d.violation, d.beta, d.primal_residual, d.dual_residual,
                d.admm_iterations, d.sqp_iterations, d.fallback ? 1 : 0, d.solve_seconds);
  return buf;
}

SQPDriver::SQPDriver(rbd::ModelSpec model, int N, int torque_stages)
    : tr_(std::move(model), N, torque_stages) {}

TrajectorySolution SQPDriver::step(const Eigen::VectorXd& z0, const Eigen::VectorXd& y0,
                                   const NLPParameters& params, const SQPSettings& settings,
                                   double timestamp) {
  settings.validate();
  const auto t_begin = std::chrono::steady_clock::now();
  const DecisionLayout& lay = tr_.layout();

  TrajectorySolution sol;
  sol.timestamp = timestamp;
  sol.z = z0;
  if (y0.size() == 0)
    sol.y = Eigen::VectorXd::Zero(lay.m_rows);
  else if (y0.size() == lay.m_rows)
    sol.y = y0;
  else
    throw std::invalid_argument("sqp: dual warm start has the wrong number of rows");

  Eigen::VectorXd d = Eigen::VectorXd::Zero(lay.n_z);
  for (int it = 0; it < settings.iterations_per_instant; ++it) {
    tr_.eval(sol.z, params, lin_);
    sol.diag.cost = lin_.cost;
    sol.diag.violation = lin_.violation;
    sol.diag.sqp_iterations = it + 1;

    bool solved = false;
    qp::ADMMResult res;
    try {
      if (!solver_ready_ || !same_admm(settings.admm, active_admm_)) {
        solver_.setup(lin_.qp, settings.admm);
        solver_ready_ = true;
        active_admm_ = settings.admm;
      } else {
        solver_.update_values(lin_.qp);
      }
      res = solver_.solve(qp::WarmStart{d, sol.y});
      solved = res.x.allFinite() && res.y.allFinite();
    } catch (const std::runtime_error&) {
      solved = false;  // numerical breakdown inside the QP; hold the trajectory
    }
    if (!solved) {
      sol.diag.beta = 0.0;
      sol.diag.fallback = true;
      continue;
    }

    sol.diag.primal_residual = res.primal_residual;
    sol.diag.dual_residual = res.dual_residual;
    sol.diag.admm_iterations = res.iterations;
    d = res.x;

    if (d.lpNorm<Eigen::Infinity>() <= 1e-14) {
      sol.diag.beta = 1.0;  // converged; nothing to move
      sol.y = res.y;
      continue;
    }

    const double directional = lin_.qp.g.dot(d);
    const LinesearchOutcome ls = filter_linesearch(
        lin_.cost, lin_.violation, directional, settings.linesearch,
        [&](double beta) {
          double c = 0.0, v = 0.0;
          tr_.eval_point(sol.z + beta * d, params, c, v);
          return std::make_pair(c, v);
        });
    // a severely inaccurate QP can hand back a direction whose minimum step
    // still blows the violation up; holding the trajectory beats following it
    if (!std::isfinite(ls.violation) || !std::isfinite(ls.cost) ||
        ls.violation > 10.0 * std::max(lin_.violation, 1.0)) {
      sol.diag.beta = 0.0;
      sol.diag.fallback = true;
      continue;
    }
    sol.z += ls.beta * d;
    sol.y = res.y;
    sol.diag.beta = ls.beta;
    sol.diag.cost = ls.cost;
    sol.diag.violation = ls.violation;
    if (ls.hit_min_step) sol.diag.fallback = true;
  }

  sol.diag.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  return sol;
}

}  // namespace wbnmpc::ocp
