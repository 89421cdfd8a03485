#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/models.hpp"
#include "support/qp_oracle.hpp"
#include "wbnmpc/qp/admm.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>

using namespace wbnmpc;
using testing::uniform;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

qp::SpMat sparse1x1(double v) {
  qp::SpMat m(1, 1);
  m.insert(0, 0) = v;
  m.makeCompressed();
  return m;
}

qp::ADMMSettings residual_mode(int cap = 100000, double eps = 1e-8) {
  qp::ADMMSettings s;
  s.mode = qp::ADMMSettings::Mode::ResidualTolerance;
  s.max_iterations = cap;
  s.eps_abs = eps;
  s.eps_rel = eps;
  return s;
}

bool bitwise_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

TEST_CASE("scalar box QP lands on the nearest boundary point") {
  qp::QPProblem p;
  p.H = sparse1x1(1.0);
  p.g = Eigen::VectorXd::Zero(1);
  p.A = sparse1x1(1.0);
  p.l = Eigen::VectorXd::Constant(1, 1.0);
  p.u = Eigen::VectorXd::Constant(1, 2.0);

  qp::SolverHandle h;
  h.setup(p, residual_mode());
  const auto res = h.solve();
  CHECK(res.status == qp::SolveStatus::Converged);
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.z[0] >= 1.0);
  CHECK(res.z[0] <= 2.0);
}

TEST_CASE("quasi-definite 1x1 KKT factors and solves") {
  qp::QPProblem p;
  p.H = sparse1x1(2.0);
  p.g = Eigen::VectorXd::Zero(1);
  p.A = sparse1x1(1.0);
  p.l = Eigen::VectorXd::Constant(1, -1.0);
  p.u = Eigen::VectorXd::Constant(1, 1.0);
  qp::SolverHandle h;
  h.setup(p, {});
  Eigen::VectorXd rhs(2);
  rhs << 1.0, 0.0;
  const Eigen::VectorXd sol = h.kkt_solve(rhs);
  CHECK(sol.allFinite());
}

TEST_CASE("KKT solves match a dense reference to 1e-10 relative") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto gen = testing::random_strictly_convex_qp(rng, 25, 35);
    const auto& p = gen.problem;
    qp::ADMMSettings s;
    qp::SolverHandle h;
    h.setup(p, s);

    const Eigen::Index n = p.num_vars(), m = p.num_rows();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + m, n + m);
    K.topLeftCorner(n, n) =
        Eigen::MatrixXd(p.H) + s.sigma * Eigen::MatrixXd::Identity(n, n);
    K.topRightCorner(n, m) = Eigen::MatrixXd(p.A).transpose();
    K.bottomLeftCorner(m, n) = Eigen::MatrixXd(p.A);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double rho = (p.u[i] - p.l[i]) <= 1e-12 ? s.rho * s.rho_eq_scale : s.rho;
      K(n + i, n + i) = -1.0 / rho;
    }

    Eigen::VectorXd rhs(n + m);
    for (Eigen::Index i = 0; i < rhs.size(); ++i) rhs[i] = uniform(rng, -1.0, 1.0);
    const Eigen::VectorXd sol = h.kkt_solve(rhs);
    const double rel = (K * sol - rhs).lpNorm<Eigen::Infinity>() /
                       std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
    CHECK(rel <= 1e-10);
  }
}

TEST_CASE("symbolic analysis runs once per pattern") {
  std::mt19937_64 rng(37);
  const auto gen = testing::random_strictly_convex_qp(rng, 10, 15);
  qp::SolverHandle h;
  h.setup(gen.problem, {});
  CHECK(h.symbolic_analysis_count() == 1);

  qp::QPProblem scaled = gen.problem;
  scaled.g *= 2.0;
  h.update_values(scaled);
  CHECK(h.symbolic_analysis_count() == 1);

  h.setup(scaled, {});  // identical pattern: symbolic work reused
  CHECK(h.symbolic_analysis_count() == 1);

  auto other = testing::random_strictly_convex_qp(rng, 12, 15);
  h.setup(other.problem, {});
  CHECK(h.symbolic_analysis_count() == 2);
}

TEST_CASE("residual-mode solutions match the dense active-set oracle") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 25; ++trial) {
    const auto gen = testing::random_strictly_convex_qp(rng, 20, 30);
    const Eigen::VectorXd x_star = testing::active_set_solve(gen.problem, gen.x_feasible);

    qp::SolverHandle h;
    h.setup(gen.problem, residual_mode());
    const auto res = h.solve();
    REQUIRE(res.status == qp::SolveStatus::Converged);
    CHECK((res.x - x_star).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("KKT optimality conditions hold after residual-mode solves") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const auto gen = testing::random_strictly_convex_qp(rng, 20, 30);
    const auto& p = gen.problem;
    qp::SolverHandle h;
    h.setup(p, residual_mode());
    const auto res = h.solve();
    REQUIRE(res.status == qp::SolveStatus::Converged);

    const Eigen::VectorXd stat = p.H * res.x + p.g + p.A.transpose() * res.y;
    CHECK(stat.lpNorm<Eigen::Infinity>() <= 1e-6);
    const Eigen::VectorXd ax = p.A * res.x;
    for (Eigen::Index i = 0; i < p.num_rows(); ++i) {
      CHECK(ax[i] >= p.l[i] - 1e-6);
      CHECK(ax[i] <= p.u[i] + 1e-6);
    }
  }
}

TEST_CASE("fixed-iteration residuals shrink as the cap grows") {
  std::mt19937_64 rng(47);
  const auto gen = testing::random_strictly_convex_qp(rng, 20, 30);
  double previous = kInf;
  double at20 = 0.0, at200 = 0.0;
  for (const int cap : {20, 50, 100, 200}) {
    qp::ADMMSettings s;
    s.mode = qp::ADMMSettings::Mode::FixedIterations;
    s.max_iterations = cap;
    qp::SolverHandle h;
    h.setup(gen.problem, s);
    const auto res = h.solve();
    CHECK(res.iterations == cap);
    const double r = std::max(res.primal_residual, res.dual_residual);
    CHECK(r <= previous * (1.0 + 1e-12));
    previous = r;
    if (cap == 20) at20 = res.primal_residual;
    if (cap == 200) at200 = res.primal_residual;
  }
  CHECK(at20 > at200);
}

TEST_CASE("update_values: doubling g doubles the unconstrained minimizer") {
  std::mt19937_64 rng(53);
  const int n = 12;
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = uniform(rng, -1.0, 1.0);
  qp::QPProblem p;
  p.H = Eigen::MatrixXd(M.transpose() * M + 0.5 * Eigen::MatrixXd::Identity(n, n)).sparseView();
  p.g.resize(n);
  for (int i = 0; i < n; ++i) p.g[i] = uniform(rng, -1.0, 1.0);
  p.A = Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n)).sparseView();
  p.l = Eigen::VectorXd::Constant(n, -kInf);
  p.u = Eigen::VectorXd::Constant(n, kInf);

  qp::SolverHandle h;
  h.setup(p, residual_mode());
  const auto first = h.solve();

  qp::QPProblem doubled = p;
  doubled.g *= 2.0;
  h.update_values(doubled);
  const auto second = h.solve();
  CHECK((second.x - 2.0 * first.x).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("pattern-changing update is rejected") {
  std::mt19937_64 rng(59);
  const auto gen = testing::random_strictly_convex_qp(rng, 10, 12);
  qp::SolverHandle h;
  h.setup(gen.problem, {});

  qp::QPProblem changed = gen.problem;
  // add a structural entry where the generator left a hole
  for (int j = 0; j < changed.A.cols(); ++j) {
    bool done = false;
    for (int i = 0; i < changed.A.rows() && !done; ++i) {
      if (qp::value_slot(changed.A, i, j) < 0) {
        changed.A.coeffRef(i, j) = 0.5;
        done = true;
      }
    }
    if (done) break;
  }
  changed.A.makeCompressed();
  CHECK_THROWS_AS(h.update_values(changed), std::invalid_argument);
}

TEST_CASE("value update then solve equals fresh setup bitwise") {
  std::mt19937_64 rng(61);
  const auto gen = testing::random_strictly_convex_qp(rng, 15, 20);
  qp::QPProblem second = gen.problem;
  // same patterns, different values; uniform positive scaling keeps l <= u
  for (Eigen::Index k = 0; k < second.H.nonZeros(); ++k) second.H.valuePtr()[k] *= 2.0;
  for (Eigen::Index k = 0; k < second.A.nonZeros(); ++k) second.A.valuePtr()[k] *= 1.5;
  second.g.array() += 0.3;
  second.l *= 1.1;
  second.u *= 1.1;

  qp::ADMMSettings fixed;
  fixed.max_iterations = 50;

  qp::SolverHandle updated;
  updated.setup(gen.problem, fixed);
  (void)updated.solve();
  updated.update_values(second);
  const auto via_update = updated.solve();

  qp::SolverHandle direct;
  direct.setup(second, fixed);
  const auto via_setup = direct.solve();

  CHECK(bitwise_equal(via_update.x, via_setup.x));
  CHECK(bitwise_equal(via_update.y, via_setup.y));
  CHECK(bitwise_equal(via_update.z, via_setup.z));
}

TEST_CASE("warm starting from a nearby solution saves iterations") {
  std::mt19937_64 rng(67);
  int warm_faster = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    const auto gen = testing::random_strictly_convex_qp(rng, 15, 20);
    qp::SolverHandle h;
    h.setup(gen.problem, residual_mode(20000, 1e-8));
    const auto base = h.solve();

    qp::QPProblem perturbed = gen.problem;
    perturbed.g *= 1.01;
    h.update_values(perturbed);
    const auto cold = h.solve();
    const auto warm = h.solve(qp::WarmStart{base.x, base.y});
    if (warm.iterations < cold.iterations) ++warm_faster;
  }
  CHECK(warm_faster >= 90);
}

TEST_CASE("z stays inside the bounds under any iteration cap") {
  std::mt19937_64 rng(71);
  const auto gen = testing::random_strictly_convex_qp(rng, 15, 20);
  qp::ADMMSettings s;
  s.max_iterations = 3;
  qp::SolverHandle h;
  h.setup(gen.problem, s);
  const auto res = h.solve();
  CHECK(res.status == qp::SolveStatus::IterationCapped);
  for (Eigen::Index i = 0; i < gen.problem.num_rows(); ++i) {
    CHECK(res.z[i] >= gen.problem.l[i]);
    CHECK(res.z[i] <= gen.problem.u[i]);
  }
}

TEST_CASE("identical inputs give bitwise-identical results") {
  std::mt19937_64 rng(73);
  const auto gen = testing::random_strictly_convex_qp(rng, 20, 30);
  qp::ADMMSettings s;
  s.max_iterations = 77;

  qp::SolverHandle a, b;
  a.setup(gen.problem, s);
  b.setup(gen.problem, s);
  const auto ra = a.solve();
  const auto rb = b.solve();
  CHECK(bitwise_equal(ra.x, rb.x));
  CHECK(bitwise_equal(ra.y, rb.y));
  CHECK(bitwise_equal(ra.z, rb.z));
  CHECK(ra.primal_residual == rb.primal_residual);
  CHECK(ra.dual_residual == rb.dual_residual);
}

TEST_CASE("non-finite iterates raise a diverged error naming the iteration") {
  std::mt19937_64 rng(79);
  const auto gen = testing::random_strictly_convex_qp(rng, 8, 10);
  qp::SolverHandle h;
  h.setup(gen.problem, {});
  qp::WarmStart w;
  w.x = Eigen::VectorXd::Constant(8, std::numeric_limits<double>::quiet_NaN());
  w.y = Eigen::VectorXd::Zero(10);
  CHECK_THROWS_WITH_AS(h.solve(w), doctest::Contains("iteration"), std::runtime_error);
}

TEST_CASE("problem dump/load round trip preserves every value") {
  std::mt19937_64 rng(83);
  auto gen = testing::random_strictly_convex_qp(rng, 12, 18);
  std::stringstream ss;
  qp::dump_problem(ss, gen.problem);
  const qp::QPProblem back = qp::load_problem(ss);

  CHECK(qp::same_pattern(back.H, gen.problem.H));
  CHECK(qp::same_pattern(back.A, gen.problem.A));
  CHECK(bitwise_equal(back.g, gen.problem.g));
  CHECK(bitwise_equal(back.l, gen.problem.l));
  CHECK(bitwise_equal(back.u, gen.problem.u));
  for (Eigen::Index k = 0; k < back.H.nonZeros(); ++k)
    CHECK(back.H.valuePtr()[k] == gen.problem.H.valuePtr()[k]);
  for (Eigen::Index k = 0; k < back.A.nonZeros(); ++k)
    CHECK(back.A.valuePtr()[k] == gen.problem.A.valuePtr()[k]);
}

TEST_CASE("problem and settings validation reject malformed input") {
  qp::QPProblem p;
  p.H = sparse1x1(1.0);
  p.g = Eigen::VectorXd::Zero(1);
  p.A = sparse1x1(1.0);
  p.l = Eigen::VectorXd::Constant(1, 2.0);
  p.u = Eigen::VectorXd::Constant(1, 1.0);
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);

  p.l[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);

  p.l[0] = 0.0;
  p.u[0] = 1.0;
  p.g = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);

  qp::ADMMSettings s;
  s.alpha_relax = 2.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.alpha_relax = 1.6;
  s.rho = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

namespace {

/// Rescales the variables of a QP by powers of ten, x -> S^-1 x, so the
/// optimum of the rescaled problem is exactly S^-1 x*. The conditioning of
/// the data worsens by the square of the scale spread.
testing::RandomQP rescale_variables(const testing::RandomQP& gen, std::mt19937_64& rng,
                                    double decade_span, Eigen::VectorXd* scale_out) {
  const Eigen::Index n = gen.problem.num_vars();
  Eigen::VectorXd s(n);
  for (Eigen::Index i = 0; i < n; ++i)
    s[i] = std::pow(10.0, uniform(rng, -decade_span, decade_span));
  testing::RandomQP out = gen;
  for (int j = 0; j < out.problem.H.outerSize(); ++j)
    for (qp::SpMat::InnerIterator it(out.problem.H, j); it; ++it)
      it.valueRef() *= s[it.row()] * s[it.col()];
  for (int j = 0; j < out.problem.A.outerSize(); ++j)
    for (qp::SpMat::InnerIterator it(out.problem.A, j); it; ++it) it.valueRef() *= s[it.col()];
  out.problem.g = out.problem.g.cwiseProduct(s);
  out.x_feasible = gen.x_feasible.cwiseQuotient(s);
  *scale_out = s;
  return out;
}

}  // namespace

TEST_CASE("equilibration solves badly scaled problems to the same optimum") {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 10; ++trial) {
    const auto gen = testing::random_strictly_convex_qp(rng, 20, 30);
    const Eigen::VectorXd x_star = testing::active_set_solve(gen.problem, gen.x_feasible);
    Eigen::VectorXd s;
    const auto bad = rescale_variables(gen, rng, 2.5, &s);

    auto settings = residual_mode(100000, 1e-9);
    settings.scaling_iterations = 10;
    qp::SolverHandle h;
    h.setup(bad.problem, settings);
    const auto res = h.solve();
    REQUIRE(res.status == qp::SolveStatus::Converged);
    // compare in the original variables, where the oracle is known
    const Eigen::VectorXd x_back = res.x.cwiseProduct(s);
    CHECK((x_back - x_star).lpNorm<Eigen::Infinity>() <= 1e-5 * std::max(1.0, x_star.lpNorm<Eigen::Infinity>()));
    // the reported solution must respect the bounds it was solved with
    for (Eigen::Index i = 0; i < bad.problem.num_rows(); ++i) {
      CHECK(res.z[i] >= bad.problem.l[i]);
      CHECK(res.z[i] <= bad.problem.u[i]);
    }
  }
}

TEST_CASE("equilibration keeps results bitwise deterministic") {
  std::mt19937_64 rng(89);
  const auto gen = testing::random_strictly_convex_qp(rng, 20, 30);
  auto settings = residual_mode(20000);
  settings.scaling_iterations = 10;
  qp::SolverHandle a, b;
  a.setup(gen.problem, settings);
  b.setup(gen.problem, settings);
  const auto ra = a.solve();
  const auto rb = b.solve();
  CHECK(bitwise_equal(ra.x, rb.x));
  CHECK(bitwise_equal(ra.y, rb.y));
  CHECK(bitwise_equal(ra.z, rb.z));

  // update_values with scaling on keeps the symbolic analysis shared
  a.update_values(gen.problem);
  CHECK(a.symbolic_analysis_count() == 1);
  const auto rc = a.solve();
  CHECK(bitwise_equal(rc.x, ra.x));
}

TEST_CASE("penalty adaptation closes the gap a fixed penalty leaves open") {
  std::mt19937_64 rng(97);
  int adaptive_wins = 0;
  for (int trial = 0; trial < 6; ++trial) {
    const auto gen = testing::random_strictly_convex_qp(rng, 20, 30);
    const Eigen::VectorXd x_star = testing::active_set_solve(gen.problem, gen.x_feasible);
    Eigen::VectorXd s;
    const auto bad = rescale_variables(gen, rng, 2.0, &s);

    auto fixed = residual_mode(20000);
    fixed.adaptive_rho_interval = 0;
    qp::SolverHandle hf;
    hf.setup(bad.problem, fixed);
    const auto rf = hf.solve();

    auto adapt = residual_mode(20000);
    REQUIRE(adapt.adaptive_rho_interval > 0);  // on by default in residual mode
    qp::SolverHandle ha;
    ha.setup(bad.problem, adapt);
    const auto ra = ha.solve();

    // adaptation must never be worse than the fixed penalty at the same cap,
    // and must converge on a clear majority of these poorly scaled problems
    CHECK(ra.iterations <= rf.iterations);
    if (ra.status == qp::SolveStatus::Converged) {
      ++adaptive_wins;
      const Eigen::VectorXd x_back = ra.x.cwiseProduct(s);
      CHECK((x_back - x_star).lpNorm<Eigen::Infinity>() <=
            1e-5 * std::max(1.0, x_star.lpNorm<Eigen::Infinity>()));
    }
    // repeat solves stay deterministic even after internal penalty rescaling
    const auto ra2 = ha.solve();
    CHECK(bitwise_equal(ra.x, ra2.x));
  }
  CHECK(adaptive_wins >= 4);
}

TEST_CASE("negative scaling iteration count is rejected") {
  qp::ADMMSettings s;
  s.scaling_iterations = -1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}
