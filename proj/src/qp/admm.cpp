#include "wbnmpc/qp/admm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wbnmpc::qp {

namespace {

constexpr double kEqualityGap = 1e-12;

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0;
}

// nearest power of two; keeps equilibration factors exactly invertible so
// scaled bounds and iterates map back to original units without rounding
double pow2_round(double v) {
  int e = 0;
  const double f = std::frexp(v, &e);  // v = f * 2^e with f in [0.5, 1)
  return f < 0.7071067811865476 ? std::ldexp(1.0, e - 1) : std::ldexp(1.0, e);
}

void scale_sym(SpMat& M, const Eigen::VectorXd& s) {  // M <- diag(s) M diag(s)
  for (int j = 0; j < M.outerSize(); ++j)
    for (SpMat::InnerIterator it(M, j); it; ++it) it.valueRef() *= s[it.row()] * s[it.col()];
}

void scale_rows_cols(SpMat& M, const Eigen::VectorXd& r, const Eigen::VectorXd& c) {
  for (int j = 0; j < M.outerSize(); ++j)
    for (SpMat::InnerIterator it(M, j); it; ++it) it.valueRef() *= r[it.row()] * c[it.col()];
}

// walks the KKT contributions in a fixed canonical order: upper triangle of
// H, the sigma diagonal, A mapped into the off-diagonal block, then the
// -1/rho diagonal. Used once for the pattern and on every value refresh.
template <typename F>
void kkt_walk(const QPProblem& p, const Eigen::VectorXd& rho_inv, double sigma, F&& emit) {
  const Eigen::Index n = p.num_vars();
  for (int j = 0; j < p.H.outerSize(); ++j)
    for (SpMat::InnerIterator it(p.H, j); it; ++it)
      if (it.row() <= it.col()) emit(it.row(), it.col(), it.value());
  for (Eigen::Index i = 0; i < n; ++i) emit(i, i, sigma);
  for (int j = 0; j < p.A.outerSize(); ++j)
    for (SpMat::InnerIterator it(p.A, j); it; ++it) emit(it.col(), n + it.row(), it.value());
  for (Eigen::Index r = 0; r < rho_inv.size(); ++r) emit(n + r, n + r, -rho_inv[r]);
}

void write_vector(std::ostream& os, const char* label, const Eigen::VectorXd& v) {
  os << label << ' ' << v.size();
  char buf[40];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
    os << ' ' << buf;
  }
  os << '\n';
}

Eigen::VectorXd read_vector(std::istream& is, const std::string& expect) {
  std::string label;
  Eigen::Index size = 0;
  if (!(is >> label >> size) || label != expect)
    throw std::runtime_error("load_problem: expected vector block '" + expect + "'");
  Eigen::VectorXd v(size);
  std::string tok;
  for (Eigen::Index i = 0; i < size; ++i) {
    if (!(is >> tok)) throw std::runtime_error("load_problem: truncated vector " + expect);
    v[i] = std::stod(tok);
  }
  return v;
}

}  // namespace

void QPProblem::validate() const {
  const Eigen::Index n = H.rows(), m = A.rows();
  if (H.cols() != n) throw std::invalid_argument("QPProblem: H must be square");
  if (g.size() != n) throw std::invalid_argument("QPProblem: g size mismatch");
  if (A.cols() != n) throw std::invalid_argument("QPProblem: A column count mismatch");
  if (l.size() != m || u.size() != m) throw std::invalid_argument("QPProblem: bound size mismatch");
  if (!g.allFinite()) throw std::invalid_argument("QPProblem: non-finite gradient");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::isnan(l[i]) || std::isnan(u[i]))
      throw std::invalid_argument("QPProblem: NaN bound at row " + std::to_string(i));
    if (!(l[i] <= u[i]))
      throw std::invalid_argument("QPProblem: l > u at row " + std::to_string(i));
    if (l[i] == u[i] && !std::isfinite(l[i]))
      throw std::invalid_argument("QPProblem: infinite equality at row " + std::to_string(i));
  }
}

void ADMMSettings::validate() const {
  if (!(rho > 0.0)) throw std::invalid_argument("ADMMSettings: rho must be positive");
  if (!(rho_eq_scale > 0.0)) throw std::invalid_argument("ADMMSettings: rho_eq_scale must be positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("ADMMSettings: sigma must be positive");
  if (!(alpha_relax > 0.0 && alpha_relax < 2.0))
    throw std::invalid_argument("ADMMSettings: alpha_relax must lie in (0, 2)");
  if (max_iterations < 1) throw std::invalid_argument("ADMMSettings: max_iterations must be >= 1");
  if (!(eps_abs > 0.0) || !(eps_rel >= 0.0))
    throw std::invalid_argument("ADMMSettings: bad tolerances");
  if (adaptive_rho_interval < 0)
    throw std::invalid_argument("ADMMSettings: negative adaptation interval");
  if (!(adaptive_rho_tolerance > 1.0))
    throw std::invalid_argument("ADMMSettings: adaptation tolerance must exceed 1");
  if (scaling_iterations < 0)
    throw std::invalid_argument("ADMMSettings: negative scaling iteration count");
}

void SolverHandle::setup(const QPProblem& problem, const ADMMSettings& settings) {
  problem.validate();
  settings.validate();
  problem_ = problem;
  problem_.H.makeCompressed();
  problem_.A.makeCompressed();
  settings_ = settings;
  equilibrate();
  assemble_and_factor();
}

void SolverHandle::update_values(const QPProblem& problem) {
  if (!analyzed_) throw std::logic_error("SolverHandle: update_values before setup");
  problem.validate();
  QPProblem fresh = problem;
  fresh.H.makeCompressed();
  fresh.A.makeCompressed();
  if (!same_pattern(fresh.H, problem_.H) || !same_pattern(fresh.A, problem_.A))
    throw std::invalid_argument("SolverHandle: sparsity pattern changed; call setup instead");
  problem_ = std::move(fresh);
  equilibrate();

  // same H/A patterns imply the same KKT pattern: refresh values through the
  // precomputed slot map and refactor numerically only
  rho_scale_ = 1.0;
  for (Eigen::Index i = 0; i < problem_.num_rows(); ++i) {
    const bool eq = (problem_.u[i] - problem_.l[i]) <= kEqualityGap;
    rho_[i] = eq ? settings_.rho * settings_.rho_eq_scale : settings_.rho;
  }
  rho_inv_ = rho_.cwiseInverse();

  double* vals = kkt_.valuePtr();
  std::fill(vals, vals + kkt_.nonZeros(), 0.0);
  Eigen::Index k = 0;
  kkt_walk(scaled_, rho_inv_, settings_.sigma,
           [&](Eigen::Index, Eigen::Index, double v) { vals[slots_[k++]] += v; });
  factor();
}

void SolverHandle::equilibrate() {
  const Eigen::Index n = problem_.num_vars(), m = problem_.num_rows();
  scaled_ = problem_;
  d_scale_ = Eigen::VectorXd::Ones(n);
  e_scale_ = Eigen::VectorXd::Ones(m);
  cost_scale_ = 1.0;

  Eigen::VectorXd dn(n), en(m), dd(n), ed(m);
  for (int round = 0; round < settings_.scaling_iterations; ++round) {
    // column infinity norms of the symmetric KKT data: variable columns see H
    // and A, constraint columns see the corresponding A row
    dn.setZero();
    en.setZero();
    for (int j = 0; j < scaled_.H.outerSize(); ++j)
      for (SpMat::InnerIterator it(scaled_.H, j); it; ++it)
        dn[j] = std::max(dn[j], std::abs(it.value()));
    for (int j = 0; j < scaled_.A.outerSize(); ++j)
      for (SpMat::InnerIterator it(scaled_.A, j); it; ++it) {
        const double a = std::abs(it.value());
        dn[j] = std::max(dn[j], a);
        en[it.row()] = std::max(en[it.row()], a);
      }
    for (Eigen::Index i = 0; i < n; ++i)
      dd[i] = dn[i] > 0.0 ? std::clamp(pow2_round(1.0 / std::sqrt(dn[i])), 0x1p-20, 0x1p20) : 1.0;
    for (Eigen::Index i = 0; i < m; ++i)
      ed[i] = en[i] > 0.0 ? std::clamp(pow2_round(1.0 / std::sqrt(en[i])), 0x1p-20, 0x1p20) : 1.0;

    scale_sym(scaled_.H, dd);
    scale_rows_cols(scaled_.A, ed, dd);
    scaled_.g = scaled_.g.cwiseProduct(dd);
    scaled_.l = scaled_.l.cwiseProduct(ed);  // exact for +-inf: ed > 0
    scaled_.u = scaled_.u.cwiseProduct(ed);
    d_scale_ = d_scale_.cwiseProduct(dd);
    e_scale_ = e_scale_.cwiseProduct(ed);

    // normalize the cost so its magnitude matches the constraint block
    double h_mean = 0.0;
    if (n > 0) {
      for (int j = 0; j < scaled_.H.outerSize(); ++j) {
        double cn = 0.0;
        for (SpMat::InnerIterator it(scaled_.H, j); it; ++it)
          cn = std::max(cn, std::abs(it.value()));
        h_mean += cn;
      }
      h_mean /= static_cast<double>(n);
    }
    const double denom = std::max(h_mean, inf_norm(scaled_.g));
    if (denom > 0.0) {
      const double c = std::clamp(pow2_round(1.0 / denom), 0x1p-20, 0x1p20);
      scaled_.H *= c;
      scaled_.g *= c;
      cost_scale_ *= c;
    }
  }
}

void SolverHandle::assemble_and_factor() {
  const Eigen::Index n = problem_.num_vars(), m = problem_.num_rows();

  // per-row penalty: equality rows get the stiffer scaling
  rho_scale_ = 1.0;
  rho_.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool eq = (problem_.u[i] - problem_.l[i]) <= kEqualityGap;
    rho_[i] = eq ? settings_.rho * settings_.rho_eq_scale : settings_.rho;
  }
  rho_inv_ = rho_.cwiseInverse();

  const bool have_pattern = analyzed_;
  SpMat fresh(n + m, n + m);
  {
    std::vector<Eigen::Triplet<double>> trips;
    kkt_walk(scaled_, rho_inv_, settings_.sigma,
             [&](Eigen::Index r, Eigen::Index c, double v) { trips.emplace_back(r, c, v); });
    fresh.setFromTriplets(trips.begin(), trips.end());
    fresh.makeCompressed();
  }

  const bool reuse = have_pattern && same_pattern(fresh, kkt_);
  kkt_ = std::move(fresh);
  if (!reuse) {
    slots_.clear();
    kkt_walk(scaled_, rho_inv_, settings_.sigma, [&](Eigen::Index r, Eigen::Index c, double) {
      slots_.push_back(value_slot(kkt_, r, c));
    });
    ldlt_.analyzePattern(kkt_);
    ++analysis_count_;
    analyzed_ = true;
  }
  factor();
}

void SolverHandle::factor() const {
  ldlt_.factorize(kkt_);
  if (ldlt_.info() != Eigen::Success) {
    const auto& d = ldlt_.vectorD();
    Eigen::Index pivot = -1;
    for (Eigen::Index i = 0; i < d.size(); ++i)
      if (!std::isfinite(d[i]) || d[i] == 0.0) { pivot = i; break; }
    throw std::runtime_error("SolverHandle: KKT factorization breakdown at pivot index " +
                             std::to_string(pivot));
  }
}

void SolverHandle::set_rho_scale(double scale) const {
  rho_scale_ = scale;
  const Eigen::Index m = problem_.num_rows();
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool eq = (problem_.u[i] - problem_.l[i]) <= kEqualityGap;
    // clamped so the -1/rho KKT diagonal never underflows against the fill
    rho_[i] = std::clamp(settings_.rho * scale * (eq ? settings_.rho_eq_scale : 1.0), 1e-9, 1e9);
  }
  rho_inv_ = rho_.cwiseInverse();
  // the -1/rho entries are the tail of the canonical walk and nothing else
  // lands on those diagonal positions, so they can be overwritten in place
  double* vals = kkt_.valuePtr();
  const size_t base = slots_.size() - static_cast<size_t>(m);
  for (Eigen::Index r = 0; r < m; ++r) vals[slots_[base + r]] = -rho_inv_[r];
  factor();
}

Eigen::VectorXd SolverHandle::kkt_solve(const Eigen::VectorXd& rhs) const {
  if (!analyzed_) throw std::logic_error("SolverHandle: kkt_solve before setup");
  if (rhs.size() != kkt_.rows()) throw std::invalid_argument("kkt_solve: rhs size mismatch");
  return ldlt_.solve(rhs);
}

ADMMResult SolverHandle::solve() const { return run(std::nullopt); }

ADMMResult SolverHandle::solve(const WarmStart& warm) const { return run(warm); }

ADMMResult SolverHandle::run(std::optional<WarmStart> warm) const {
  if (!analyzed_) throw std::logic_error("SolverHandle: solve before setup");
  if (rho_scale_ != 1.0) set_rho_scale(1.0);  // every solve starts from the base penalty
  const Eigen::Index n = problem_.num_vars(), m = problem_.num_rows();
  const double alpha = settings_.alpha_relax;

  // the iteration runs on the equilibrated copy; x, y, z here are scaled
  // iterates and map back as x_orig = D x, y_orig = E y / c, z_orig = z / E
  Eigen::VectorXd x, y, z;
  if (warm) {
    if (warm->x.size() != n || warm->y.size() != m)
      throw std::invalid_argument("SolverHandle: warm start size mismatch");
    x = warm->x.cwiseQuotient(d_scale_);
    y = cost_scale_ * warm->y.cwiseProduct(e_scale_);
    z = (scaled_.A * x).cwiseMax(scaled_.l).cwiseMin(scaled_.u);
  } else {
    x.setZero(n);
    y.setZero(m);
    z = Eigen::VectorXd::Zero(m).cwiseMax(scaled_.l).cwiseMin(scaled_.u);
  }

  Eigen::VectorXd rhs(n + m), sol(n + m), ztilde(m);

  ADMMResult res;
  const bool fixed = settings_.mode == ADMMSettings::Mode::FixedIterations;
  int it = 0;
  bool converged = false;

  struct Residuals {
    double prim, dual, eps_prim, eps_dual, prim_scale, dual_scale;
  };
  // residuals and tolerances are always evaluated in original units by
  // unscaling the matrix-vector products of the equilibrated iteration
  auto residuals = [&]() {
    const Eigen::VectorXd ax = (scaled_.A * x).cwiseQuotient(e_scale_);
    const Eigen::VectorXd zu = z.cwiseQuotient(e_scale_);
    const Eigen::VectorXd hx = (scaled_.H * x).cwiseQuotient(d_scale_) / cost_scale_;
    const Eigen::VectorXd aty = (scaled_.A.transpose() * y).cwiseQuotient(d_scale_) / cost_scale_;
    const double ax_n = inf_norm(ax), z_n = inf_norm(zu);
    const double hx_n = inf_norm(hx), aty_n = inf_norm(aty), g_n = inf_norm(problem_.g);
    Residuals r;
    r.prim = inf_norm(ax - zu);
    r.dual = inf_norm(hx + problem_.g + aty);
    r.eps_prim = settings_.eps_abs + settings_.eps_rel * std::max(ax_n, z_n);
    r.eps_dual = settings_.eps_abs + settings_.eps_rel * std::max({hx_n, aty_n, g_n});
    r.prim_scale = std::max({ax_n, z_n, 1e-12});
    r.dual_scale = std::max({hx_n, aty_n, g_n, 1e-12});
    return r;
  };

  const bool adaptive = !fixed && settings_.adaptive_rho_interval > 0;
  while (it < settings_.max_iterations) {
    ++it;
    rhs.head(n) = settings_.sigma * x - scaled_.g;
    rhs.tail(m) = z - rho_inv_.cwiseProduct(y);
    sol = ldlt_.solve(rhs);

    // over-relaxed update, then exact projection of z onto the bounds
    x = alpha * sol.head(n) + (1.0 - alpha) * x;
    ztilde = alpha * (z + rho_inv_.cwiseProduct(sol.tail(m) - y)) + (1.0 - alpha) * z;
    z = (ztilde + rho_inv_.cwiseProduct(y)).cwiseMax(scaled_.l).cwiseMin(scaled_.u);
    y += rho_.cwiseProduct(ztilde - z);

    if (!x.allFinite() || (m > 0 && !(y.allFinite() && z.allFinite())))
      throw std::runtime_error("SolverHandle: iterates diverged (non-finite) at iteration " +
                               std::to_string(it));

    if (!fixed) {
      const Residuals r = residuals();
      if (r.prim <= r.eps_prim && r.dual <= r.eps_dual) {
        res.primal_residual = r.prim;
        res.dual_residual = r.dual;
        converged = true;
        break;
      }
      // steer the penalty toward the point where both termination tests pass
      // together: compare how far each residual sits from its own threshold
      if (adaptive && m > 0 && it % settings_.adaptive_rho_interval == 0 &&
          it < settings_.max_iterations) {
        const double ratio =
            std::sqrt((r.prim / r.eps_prim) / std::max(r.dual / r.eps_dual, 1e-16));
        if (std::isfinite(ratio) && ratio > 0.0 &&
            (ratio > settings_.adaptive_rho_tolerance ||
             ratio < 1.0 / settings_.adaptive_rho_tolerance)) {
          const double next = std::clamp(rho_scale_ * ratio, 1e-6, 1e6);
          if (next != rho_scale_) set_rho_scale(next);
        }
      }
    }
  }

  if (!converged) {
    const Residuals r = residuals();
    res.primal_residual = r.prim;
    res.dual_residual = r.dual;
    converged = r.prim <= r.eps_prim && r.dual <= r.eps_dual;
  }

  res.x = x.cwiseProduct(d_scale_);
  res.y = y.cwiseProduct(e_scale_) / cost_scale_;
  res.z = z.cwiseQuotient(e_scale_);
  res.iterations = it;
  res.status = converged ? SolveStatus::Converged : SolveStatus::IterationCapped;
  return res;
}

void dump_problem(std::ostream& os, const QPProblem& p) {
  os << "qpdump 1\n";
  os << "H\n";
  dump_triplets(os, p.H);
  write_vector(os, "g", p.g);
  os << "A\n";
  dump_triplets(os, p.A);
  write_vector(os, "l", p.l);
  write_vector(os, "u", p.u);
}

QPProblem load_problem(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "qpdump" || version != 1)
    throw std::runtime_error("load_problem: unrecognized header");
  std::string label;
  QPProblem p;
  if (!(is >> label) || label != "H") throw std::runtime_error("load_problem: expected H block");
  p.H = load_triplets(is);
  p.g = read_vector(is, "g");
  if (!(is >> label) || label != "A") throw std::runtime_error("load_problem: expected A block");
  p.A = load_triplets(is);
  p.l = read_vector(is, "l");
  p.u = read_vector(is, "u");
  p.validate();
  return p;
}

}  // namespace wbnmpc::qp
