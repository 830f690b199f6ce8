#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <string>
#include <type_traits>

#include <Eigen/Dense>

#include "error.hpp"

namespace qnet {

using cplx = std::complex<double>;

namespace detail {
template <typename T>
struct is_complex : std::false_type {};
template <typename T>
struct is_complex<std::complex<T>> : std::true_type {};

inline double abs2(double x) { return x * x; }
inline double abs2(cplx x) { return std::norm(x); }
inline double conj(double x) { return x; }
inline cplx conj(cplx x) { return std::conj(x); }
}  // namespace detail

/// Element a*e + b*i + c*j + d*k with matrix form [[a+ib, c+id], [c-id, a-ib]].
/// T = double gives the ring itself; T = complex<double> its complexification,
/// which is where transfer functions evaluated at complex s live.
template <typename T>
class BasicDNum {
 public:
  using value_type = T;

  constexpr BasicDNum() = default;
  constexpr BasicDNum(T a, T b, T c, T d) : a_(a), b_(b), c_(c), d_(d) {}
  explicit constexpr BasicDNum(T scalar) : a_(scalar) {}

  template <typename U>
    requires(!std::is_same_v<U, T> && std::is_convertible_v<U, T>)
  constexpr BasicDNum(const BasicDNum<U>& o) : a_(o.a()), b_(o.b()), c_(o.c()), d_(o.d()) {}

  static constexpr BasicDNum e() { return {T(1), T(0), T(0), T(0)}; }
  static constexpr BasicDNum i() { return {T(0), T(1), T(0), T(0)}; }
  static constexpr BasicDNum j() { return {T(0), T(0), T(1), T(0)}; }
  static constexpr BasicDNum k() { return {T(0), T(0), T(0), T(1)}; }

  constexpr T a() const { return a_; }
  constexpr T b() const { return b_; }
  constexpr T c() const { return c_; }
  constexpr T d() const { return d_; }

  /// Top-left and top-right entries of the matrix form.
  cplx alpha() const { return cplx(0, 0) + a_ + cplx(0, 1) * b_; }
  cplx beta() const { return cplx(0, 0) + c_ + cplx(0, 1) * d_; }

  Eigen::Matrix2cd matrix() const {
    const cplx I(0, 1);
    Eigen::Matrix2cd m;
    m(0, 0) = cplx(a_) + I * b_;
    m(0, 1) = cplx(c_) + I * d_;
    m(1, 0) = cplx(c_) - I * d_;
    m(1, 1) = cplx(a_) - I * b_;
    return m;
  }

  /// Orthogonal projection of an arbitrary 2x2 complex matrix onto the span of e,i,j,k.
  static BasicDNum from_matrix(const Eigen::Matrix2cd& m) {
    const cplx a = (m(0, 0) + m(1, 1)) * 0.5;
    const cplx b = (m(0, 0) - m(1, 1)) * cplx(0, -0.5);
    const cplx c = (m(0, 1) + m(1, 0)) * 0.5;
    const cplx d = (m(0, 1) - m(1, 0)) * cplx(0, -0.5);
    if constexpr (detail::is_complex<T>::value) {
      return {a, b, c, d};
    } else {
      return {a.real(), b.real(), c.real(), d.real()};
    }
  }

  constexpr BasicDNum operator-() const { return {-a_, -b_, -c_, -d_}; }
  constexpr BasicDNum& operator+=(const BasicDNum& o) {
    a_ += o.a_, b_ += o.b_, c_ += o.c_, d_ += o.d_;
    return *this;
  }
  constexpr BasicDNum& operator-=(const BasicDNum& o) {
    a_ -= o.a_, b_ -= o.b_, c_ -= o.c_, d_ -= o.d_;
    return *this;
  }
  constexpr BasicDNum& operator*=(T s) {
    a_ *= s, b_ *= s, c_ *= s, d_ *= s;
    return *this;
  }
  constexpr BasicDNum& operator*=(const BasicDNum& o) { return *this = *this * o; }

  friend constexpr BasicDNum operator+(BasicDNum x, const BasicDNum& y) { return x += y; }
  friend constexpr BasicDNum operator-(BasicDNum x, const BasicDNum& y) { return x -= y; }
  friend constexpr BasicDNum operator*(BasicDNum x, T s) { return x *= s; }
  friend constexpr BasicDNum operator*(T s, BasicDNum x) { return x *= s; }
  friend constexpr BasicDNum operator/(BasicDNum x, T s) { return x *= (T(1) / s); }

  friend constexpr BasicDNum operator*(const BasicDNum& x, const BasicDNum& y) {
    return {x.a_ * y.a_ - x.b_ * y.b_ + x.c_ * y.c_ + x.d_ * y.d_,
            x.a_ * y.b_ + x.b_ * y.a_ - x.c_ * y.d_ + x.d_ * y.c_,
            x.a_ * y.c_ + x.c_ * y.a_ - x.b_ * y.d_ + x.d_ * y.b_,
            x.a_ * y.d_ + x.d_ * y.a_ + x.b_ * y.c_ - x.c_ * y.b_};
  }

  friend constexpr bool operator==(const BasicDNum&, const BasicDNum&) = default;

  /// (conj a, -conj b, -conj c, -conj d).
  BasicDNum flat() const {
    return {detail::conj(a_), -detail::conj(b_), -detail::conj(c_), -detail::conj(d_)};
  }

  /// Determinant of the matrix form: a^2 + b^2 - c^2 - d^2.
  T det() const { return a_ * a_ + b_ * b_ - c_ * c_ - d_ * d_; }

  /// Squared Frobenius norm of the matrix form.
  double norm2() const {
    return 2.0 * (detail::abs2(a_) + detail::abs2(b_) + detail::abs2(c_) + detail::abs2(d_));
  }
  double norm() const { return std::sqrt(norm2()); }

  bool is_invertible(double rel_tol = 1e-12) const {
    return std::abs(det()) > rel_tol * std::max(1.0, norm2());
  }

  BasicDNum inverse(double rel_tol = 1e-12) const {
    if (!is_invertible(rel_tol)) throw Error(ErrorCode::NonInvertible, "singular ring element");
    const T dt = det();
    return BasicDNum{a_, -b_, -c_, -d_} / dt;
  }

 private:
  T a_{}, b_{}, c_{}, d_{};
};

using DNum = BasicDNum<double>;
using CDNum = BasicDNum<cplx>;

/// Element with matrix form [[alpha, beta], [conj beta, conj alpha]].
inline DNum make_dnum(cplx alpha, cplx beta) {
  return {alpha.real(), alpha.imag(), beta.real(), beta.imag()};
}

/// Complex scalar z times e.
inline CDNum cscalar(cplx z) { return CDNum(z); }

template <typename T>
BasicDNum<T> flat(const BasicDNum<T>& p) {
  return p.flat();
}
template <typename T>
BasicDNum<T> inverse(const BasicDNum<T>& p) {
  return p.inverse();
}

inline CDNum complexify(const DNum& p) { return CDNum(p); }

template <typename T>
bool approx_equal(const BasicDNum<T>& p, const BasicDNum<T>& q, double tol) {
  return std::abs(p.a() - q.a()) <= tol && std::abs(p.b() - q.b()) <= tol &&
         std::abs(p.c() - q.c()) <= tol && std::abs(p.d() - q.d()) <= tol;
}

/// Spectral invariants of a single ring element: eigenvalues are a +- sqrt(C).
struct ModeInvariants {
  double a = 0;
  double C = 0;
};

inline ModeInvariants classify(const DNum& p) {
  return {p.a(), -p.b() * p.b() + p.c() * p.c() + p.d() * p.d()};
}

struct ModeLabels {
  bool gain = false;
  bool lossy = false;
  bool squeezed = false;
};

inline ModeLabels labels(const ModeInvariants& m, double tol = 1e-12) {
  return {m.a > tol, m.a < -tol, m.C > tol};
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string to_literal(const DNum& p) {
  return "d(" + format_double(p.a()) + "," + format_double(p.b()) + "," + format_double(p.c()) +
         "," + format_double(p.d()) + ")";
}

}  // namespace qnet
