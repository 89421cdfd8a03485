#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "wbnmpc/rbd/dual.hpp"

#include <cmath>
#include <functional>
#include <random>

using wbnmpc::rbd::Dual;

namespace {

// central-difference derivative of a scalar chain expressed over duals
double central_diff(const std::function<double(double)>& f, double x, double eps = 1e-6) {
  return (f(x + eps) - f(x - eps)) / (2.0 * eps);
}

}  // namespace

TEST_CASE("arithmetic follows the chain rule against central differences") {
  std::mt19937_64 rng(7);
  auto draw = [&] { return -1.5 + 3.0 * ((rng() >> 11) * 0x1.0p-53); };

  struct Case {
    const char* name;
    std::function<Dual(Dual)> fd;
    std::function<double(double)> f;
  };
  const Case cases[] = {
      {"poly", [](Dual x) { return x * x * x - 2.0 * x + Dual(0.5); },
       [](double x) { return x * x * x - 2.0 * x + 0.5; }},
      {"ratio", [](Dual x) { return (x * x + 1.0) / (x + 3.0); },
       [](double x) { return (x * x + 1.0) / (x + 3.0); }},
      {"trig", [](Dual x) { return sin(x) * cos(2.0 * x) + tan(0.3 * x); },
       [](double x) { return std::sin(x) * std::cos(2.0 * x) + std::tan(0.3 * x); }},
      {"exp-log", [](Dual x) { return exp(0.5 * x) + log(x + 2.0); },
       [](double x) { return std::exp(0.5 * x) + std::log(x + 2.0); }},
      {"sqrt", [](Dual x) { return sqrt(x * x + 1.0); },
       [](double x) { return std::sqrt(x * x + 1.0); }},
      {"atan2", [](Dual x) { return atan2(x, 1.0 + x * x); },
       [](double x) { return std::atan2(x, 1.0 + x * x); }},
  };

  for (const auto& c : cases) {
    CAPTURE(c.name);
    for (int trial = 0; trial < 25; ++trial) {
      const double x = draw();
      const Dual r = c.fd(Dual::seed(x, 1, 0));
      CHECK(r.value() == doctest::Approx(c.f(x)).epsilon(1e-12));
      CHECK(r.deriv(0) == doctest::Approx(central_diff(c.f, x)).epsilon(1e-6));
    }
  }
}

TEST_CASE("multi-seed gradients and constant mixing") {
  const Dual x = Dual::seed(0.7, 3, 0);
  const Dual y = Dual::seed(-0.2, 3, 1);
  const Dual z = Dual::seed(1.3, 3, 2);

  const Dual f = x * y + sin(z) * x - y / z;
  CHECK(f.deriv(0) == doctest::Approx(-0.2 + std::sin(1.3)));
  CHECK(f.deriv(1) == doctest::Approx(0.7 - 1.0 / 1.3));
  CHECK(f.deriv(2) == doctest::Approx(std::cos(1.3) * 0.7 + (-0.2) / (1.3 * 1.3)));

  // constants carry no derivative and promote to the seeded width
  const Dual g = 2.0 * x + Dual(5.0);
  CHECK(g.value() == doctest::Approx(6.4));
  CHECK(g.deriv(0) == doctest::Approx(2.0));
  CHECK(g.deriv(1) == 0.0);
}

TEST_CASE("abs, min, max pick the active branch") {
  const Dual x = Dual::seed(-0.4, 1, 0);
  CHECK(abs(x).value() == doctest::Approx(0.4));
  CHECK(abs(x).deriv(0) == doctest::Approx(-1.0));
  CHECK(min(x, Dual(0.0)).deriv(0) == doctest::Approx(1.0));
  CHECK(max(x, Dual(0.0)).deriv(0) == 0.0);
}

TEST_CASE("comparisons act on values") {
  CHECK(Dual::seed(1.0, 2, 0) > Dual(0.5));
  CHECK(Dual(0.25) <= Dual::seed(0.25, 2, 1));
  CHECK_FALSE(Dual(2.0) < Dual(2.0));
}
