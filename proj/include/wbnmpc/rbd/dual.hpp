#pragma once

#include <Eigen/Core>

#include <cassert>
#include <cmath>

namespace wbnmpc::rbd {

// Maximum forward-mode seed width. Derivative vectors are stack-allocated up
// to this size, so a model must satisfy 3 * nv() <= kMaxSeedDim to use the
// joint (q, v, v') seeding in the transcription.
inline constexpr int kMaxSeedDim = 32;

using DerivVec =
    Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor | Eigen::DontAlign, kMaxSeedDim, 1>;

/// Forward-mode dual number with a configurable-width derivative vector.
///
/// A Dual constructed from a plain double is a constant: its derivative
/// vector is empty and treated as identically zero, so constants mix freely
/// with seeded values of any width. Two non-constant operands must carry the
/// same seed width.
class Dual {
 public:
  Dual() : val_(0.0) {}
  Dual(double v) : val_(v) {}  // NOLINT: implicit by design, constants promote
  Dual(double v, const DerivVec& d) : val_(v), der_(d) {}

  /// A value seeded as independent variable `index` of a `dim`-wide tangent.
  static Dual seed(double v, int dim, int index) {
    assert(dim <= kMaxSeedDim && index >= 0 && index < dim);
    Dual r(v);
    r.der_.setZero(dim);
    r.der_[index] = 1.0;
    return r;
  }

  double value() const { return val_; }
  const DerivVec& deriv() const { return der_; }
  /// Derivative w.r.t. seed `i`; zero for constants.
  double deriv(int i) const { return der_.size() ? der_[i] : 0.0; }

  Dual operator-() const { return Dual(-val_, scaled(der_, -1.0)); }
  Dual& operator+=(const Dual& o) { *this = *this + o; return *this; }
  Dual& operator-=(const Dual& o) { *this = *this - o; return *this; }
  Dual& operator*=(const Dual& o) { *this = *this * o; return *this; }
  Dual& operator/=(const Dual& o) { *this = *this / o; return *this; }

  friend Dual operator+(const Dual& a, const Dual& b) {
    return Dual(a.val_ + b.val_, add(a.der_, b.der_));
  }
  friend Dual operator-(const Dual& a, const Dual& b) {
    return Dual(a.val_ - b.val_, sub(a.der_, b.der_));
  }
  friend Dual operator*(const Dual& a, const Dual& b) {
    return Dual(a.val_ * b.val_, axpby(b.val_, a.der_, a.val_, b.der_));
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    const double inv = 1.0 / b.val_;
    return Dual(a.val_ * inv, axpby(inv, a.der_, -a.val_ * inv * inv, b.der_));
  }

  friend bool operator<(const Dual& a, const Dual& b) { return a.val_ < b.val_; }
  friend bool operator>(const Dual& a, const Dual& b) { return a.val_ > b.val_; }
  friend bool operator<=(const Dual& a, const Dual& b) { return a.val_ <= b.val_; }
  friend bool operator>=(const Dual& a, const Dual& b) { return a.val_ >= b.val_; }
  friend bool operator==(const Dual& a, const Dual& b) { return a.val_ == b.val_; }
  friend bool operator!=(const Dual& a, const Dual& b) { return a.val_ != b.val_; }

  /// f(x) -> {fv, dfv * x'}
  friend Dual chain(double fv, double dfv, const Dual& x) {
    return Dual(fv, scaled(x.der_, dfv));
  }

 private:
  static DerivVec add(const DerivVec& x, const DerivVec& y) {
    if (x.size() == 0) return y;
    if (y.size() == 0) return x;
    assert(x.size() == y.size());
    return x + y;
  }
  static DerivVec sub(const DerivVec& x, const DerivVec& y) {
    if (y.size() == 0) return x;
    if (x.size() == 0) return DerivVec(-y);
    assert(x.size() == y.size());
    return x - y;
  }
  static DerivVec scaled(const DerivVec& x, double s) {
    return x.size() ? DerivVec(s * x) : x;
  }
  static DerivVec axpby(double a, const DerivVec& x, double b, const DerivVec& y) {
    if (x.size() == 0) return scaled(y, b);
    if (y.size() == 0) return scaled(x, a);
    assert(x.size() == y.size());
    return a * x + b * y;
  }

  double val_;
  DerivVec der_;
};

inline Dual sin(const Dual& x) { return chain(std::sin(x.value()), std::cos(x.value()), x); }
inline Dual cos(const Dual& x) { return chain(std::cos(x.value()), -std::sin(x.value()), x); }
inline Dual tan(const Dual& x) {
  const double t = std::tan(x.value());
  return chain(t, 1.0 + t * t, x);
}
inline Dual exp(const Dual& x) {
  const double e = std::exp(x.value());
  return chain(e, e, x);
}
inline Dual log(const Dual& x) { return chain(std::log(x.value()), 1.0 / x.value(), x); }
inline Dual sqrt(const Dual& x) {
  const double s = std::sqrt(x.value());
  return chain(s, 0.5 / s, x);
}
inline Dual abs(const Dual& x) { return x.value() < 0.0 ? -x : x; }
inline Dual min(const Dual& a, const Dual& b) { return a.value() <= b.value() ? a : b; }
inline Dual max(const Dual& a, const Dual& b) { return a.value() >= b.value() ? a : b; }
inline Dual atan2(const Dual& y, const Dual& x) {
  // d atan2(y, x) = (x dy - y dx) / (x^2 + y^2)
  const double denom = x.value() * x.value() + y.value() * y.value();
  const Dual lin = Dual(x.value() / denom) * y - Dual(y.value() / denom) * x;
  return Dual(std::atan2(y.value(), x.value()), lin.deriv());
}

}  // namespace wbnmpc::rbd
