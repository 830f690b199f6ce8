#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "dring.hpp"
#include "error.hpp"

namespace qnet {

/// Dense row-major matrix whose entries are ring elements.
template <typename T>
class BasicDMatrix {
 public:
  using entry_type = BasicDNum<T>;

  BasicDMatrix() = default;
  BasicDMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
  BasicDMatrix(std::size_t rows, std::size_t cols, std::vector<entry_type> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols)
      throw Error(ErrorCode::DimensionMismatch, "entry count does not match shape");
  }
  BasicDMatrix(std::initializer_list<std::initializer_list<entry_type>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    for (const auto& r : rows) {
      if (r.size() != cols_) throw Error(ErrorCode::DimensionMismatch, "ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  template <typename U>
    requires(!std::is_same_v<U, T> && std::is_convertible_v<U, T>)
  BasicDMatrix(const BasicDMatrix<U>& o) : rows_(o.rows()), cols_(o.cols()), data_(o.size()) {
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] = entry_type(o.data()[n]);
  }

  static BasicDMatrix zero(std::size_t rows, std::size_t cols) { return {rows, cols}; }
  static BasicDMatrix identity(std::size_t n) {
    BasicDMatrix m(n, n);
    for (std::size_t j = 0; j < n; ++j) m(j, j) = entry_type::e();
    return m;
  }
  static BasicDMatrix diagonal(const std::vector<entry_type>& d) {
    BasicDMatrix m(d.size(), d.size());
    for (std::size_t j = 0; j < d.size(); ++j) m(j, j) = d[j];
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool is_square() const { return rows_ == cols_; }
  const std::vector<entry_type>& data() const { return data_; }

  entry_type& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const entry_type& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  BasicDMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) throw Error(ErrorCode::DimensionMismatch, "block out of range");
    BasicDMatrix m(nr, nc);
    for (std::size_t r = 0; r < nr; ++r)
      for (std::size_t c = 0; c < nc; ++c) m(r, c) = (*this)(r0 + r, c0 + c);
    return m;
  }
  void set_block(std::size_t r0, std::size_t c0, const BasicDMatrix& b) {
    if (r0 + b.rows() > rows_ || c0 + b.cols() > cols_)
      throw Error(ErrorCode::DimensionMismatch, "block out of range");
    for (std::size_t r = 0; r < b.rows(); ++r)
      for (std::size_t c = 0; c < b.cols(); ++c) (*this)(r0 + r, c0 + c) = b(r, c);
  }

  BasicDMatrix flat() const {
    BasicDMatrix m(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) m(c, r) = (*this)(r, c).flat();
    return m;
  }

  double norm2() const {
    double s = 0;
    for (const auto& x : data_) s += x.norm2();
    return s;
  }
  /// Frobenius norm of the doubled form.
  double norm() const { return std::sqrt(norm2()); }

  BasicDMatrix operator-() const {
    BasicDMatrix m = *this;
    for (auto& x : m.data_) x = -x;
    return m;
  }
  BasicDMatrix& operator+=(const BasicDMatrix& o) {
    check_same(o);
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] += o.data_[n];
    return *this;
  }
  BasicDMatrix& operator-=(const BasicDMatrix& o) {
    check_same(o);
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] -= o.data_[n];
    return *this;
  }
  BasicDMatrix& operator*=(T s) {
    for (auto& x : data_) x *= s;
    return *this;
  }

  friend BasicDMatrix operator+(BasicDMatrix a, const BasicDMatrix& b) { return a += b; }
  friend BasicDMatrix operator-(BasicDMatrix a, const BasicDMatrix& b) { return a -= b; }
  friend BasicDMatrix operator*(BasicDMatrix a, T s) { return a *= s; }
  friend BasicDMatrix operator*(T s, BasicDMatrix a) { return a *= s; }

  friend BasicDMatrix operator*(const BasicDMatrix& a, const BasicDMatrix& b) {
    if (a.cols_ != b.rows_) throw Error(ErrorCode::DimensionMismatch, "product shape mismatch");
    BasicDMatrix m(a.rows_, b.cols_);
    for (std::size_t r = 0; r < a.rows_; ++r)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const entry_type& x = a(r, k);
        for (std::size_t c = 0; c < b.cols_; ++c) m(r, c) += x * b(k, c);
      }
    return m;
  }

  /// Left scalar multiplication by a ring element.
  friend BasicDMatrix operator*(const entry_type& p, BasicDMatrix a) {
    for (auto& x : a.data_) x = p * x;
    return a;
  }
  friend BasicDMatrix operator*(BasicDMatrix a, const entry_type& p) {
    for (auto& x : a.data_) x = x * p;
    return a;
  }

  friend bool operator==(const BasicDMatrix&, const BasicDMatrix&) = default;

 private:
  void check_same(const BasicDMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw Error(ErrorCode::DimensionMismatch, "sum shape mismatch");
  }

  std::size_t rows_ = 0, cols_ = 0;
  std::vector<entry_type> data_;
};

using DMatrix = BasicDMatrix<double>;
using CDMatrix = BasicDMatrix<cplx>;

template <typename T>
BasicDMatrix<T> flat(const BasicDMatrix<T>& a) {
  return a.flat();
}

inline CDMatrix complexify(const DMatrix& a) { return CDMatrix(a); }

/// Real part of a complexified matrix, discarding imaginary coefficient parts.
inline DMatrix real_part(const CDMatrix& a) {
  DMatrix m(a.rows(), a.cols());
  for (std::size_t n = 0; n < a.size(); ++n) {
    const auto& x = a.data()[n];
    m(n / a.cols(), n % a.cols()) = DNum(x.a().real(), x.b().real(), x.c().real(), x.d().real());
  }
  return m;
}

/// 2m x 2n complex matrix assembled from the 2x2 matrix forms of the entries.
template <typename T>
Eigen::MatrixXcd to_doubled(const BasicDMatrix<T>& a) {
  Eigen::MatrixXcd m(2 * a.rows(), 2 * a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) m.template block<2, 2>(2 * r, 2 * c) = a(r, c).matrix();
  return m;
}

/// Inverse of to_doubled; blocks outside the ring are projected onto it.
template <typename T = cplx>
BasicDMatrix<T> from_doubled(const Eigen::MatrixXcd& m) {
  if (m.rows() % 2 || m.cols() % 2) throw Error(ErrorCode::DimensionMismatch, "doubled form must have even shape");
  BasicDMatrix<T> a(m.rows() / 2, m.cols() / 2);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c)
      a(r, c) = BasicDNum<T>::from_matrix(m.template block<2, 2>(2 * r, 2 * c));
  return a;
}

/// Entry (j,k) = make_dnum(minus(j,k), plus(j,k)).
inline DMatrix from_blockform(const Eigen::MatrixXcd& minus, const Eigen::MatrixXcd& plus) {
  if (minus.rows() != plus.rows() || minus.cols() != plus.cols() || minus.rows() != minus.cols())
    throw Error(ErrorCode::DimensionMismatch, "block form parts must be equal square matrices");
  DMatrix a(minus.rows(), minus.cols());
  for (Eigen::Index j = 0; j < minus.rows(); ++j)
    for (Eigen::Index k = 0; k < minus.cols(); ++k) a(j, k) = make_dnum(minus(j, k), plus(j, k));
  return a;
}

template <typename T>
bool is_skew_flat_hermitian(const BasicDMatrix<T>& a, double tol = 1e-12) {
  if (!a.is_square()) return false;
  return (a.flat() + a).norm() <= tol * a.norm();
}

template <typename T>
bool is_flat_hermitian(const BasicDMatrix<T>& a, double tol = 1e-12) {
  if (!a.is_square()) return false;
  return (a.flat() - a).norm() <= tol * std::max(1.0, a.norm());
}

template <typename T>
double flat_unitary_defect(const BasicDMatrix<T>& a) {
  return (a.flat() * a - BasicDMatrix<T>::identity(a.cols())).norm();
}

template <typename T>
bool is_flat_unitary(const BasicDMatrix<T>& a, double tol = 1e-10) {
  return a.is_square() && flat_unitary_defect(a) <= tol;
}

template <typename T>
double max_abs_diff(const BasicDMatrix<T>& a, const BasicDMatrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw Error(ErrorCode::DimensionMismatch, "shape mismatch");
  double m = 0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    const auto& x = a.data()[n];
    const auto& y = b.data()[n];
    m = std::max({m, std::abs(x.a() - y.a()), std::abs(x.b() - y.b()), std::abs(x.c() - y.c()),
                  std::abs(x.d() - y.d())});
  }
  return m;
}

namespace detail {

inline constexpr double kCondLimit = 1e12;

/// LU solve with a reciprocal-condition check; returns false when ill-conditioned.
inline bool checked_solve(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& rhs, Eigen::MatrixXcd& out) {
  if (a.rows() == 0) {
    out = rhs;
    return true;
  }
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
  const double rc = lu.rcond();
  if (!(rc > 1.0 / kCondLimit)) return false;
  out = lu.solve(rhs);
  return out.allFinite();
}

inline bool checked_inverse(const Eigen::MatrixXcd& a, Eigen::MatrixXcd& out) {
  return checked_solve(a, Eigen::MatrixXcd::Identity(a.rows(), a.cols()), out);
}

}  // namespace detail

template <typename T>
BasicDMatrix<T> inverse(const BasicDMatrix<T>& a) {
  if (!a.is_square()) throw Error(ErrorCode::DimensionMismatch, "inverse of a non-square matrix");
  Eigen::MatrixXcd inv;
  if (!detail::checked_inverse(to_doubled(a), inv)) throw Error(ErrorCode::NonInvertible, "matrix is singular");
  return from_doubled<T>(inv);
}

template <typename T>
BasicDMatrix<T> expm(const BasicDMatrix<T>& a) {
  if (!a.is_square()) throw Error(ErrorCode::DimensionMismatch, "exponential of a non-square matrix");
  const Eigen::MatrixXcd d = to_doubled(a);
  return from_doubled<T>(d.exp());
}

/// Square matrix with P-flat = -P.
class Generator {
 public:
  explicit Generator(DMatrix p, double tol = 1e-12) : p_(std::move(p)) {
    if (!p_.is_square()) throw Error(ErrorCode::DimensionMismatch, "generator must be square");
    if (!is_skew_flat_hermitian(p_, tol))
      throw Error(ErrorCode::InvalidArgument, "generator is not skew flat-Hermitian");
  }
  const DMatrix& matrix() const { return p_; }
  std::size_t modes() const { return p_.rows(); }
  operator const DMatrix&() const { return p_; }

 private:
  DMatrix p_;
};

struct ColumnDecomposition {
  DMatrix E;
  DMatrix D;
  std::size_t rank = 0;
};

/// C = E * D-flat with E a subset of the columns of C and rank the column rank over the ring.
inline ColumnDecomposition d_column_decompose(const DMatrix& C, double tol = 1e-10) {
  const std::size_t m = C.rows(), n = C.cols();
  const double scale = std::max(1.0, C.norm());
  DMatrix R = C;
  std::vector<std::size_t> pivots;
  std::size_t row = 0;
  for (std::size_t col = 0; col < n && row < m; ++col) {
    std::size_t best = m;
    double best_det = 0, col_norm = 0;
    for (std::size_t r = row; r < m; ++r) {
      col_norm = std::max(col_norm, R(r, col).norm());
      const double dt = std::abs(R(r, col).det());
      if (dt > best_det) best_det = dt, best = r;
    }
    if (col_norm <= tol * scale) continue;
    if (best == m || best_det <= tol * scale * scale)
      throw Error(ErrorCode::DegenerateCoupling, "elimination stalled on a zero-divisor pivot in column " +
                                                     std::to_string(col));
    for (std::size_t c = 0; c < n; ++c) std::swap(R(row, c), R(best, c));
    const DNum inv = R(row, col).inverse();
    for (std::size_t c = 0; c < n; ++c) R(row, c) = inv * R(row, c);
    for (std::size_t r = 0; r < m; ++r) {
      if (r == row) continue;
      const DNum f = R(r, col);
      for (std::size_t c = 0; c < n; ++c) R(r, c) -= f * R(row, c);
    }
    pivots.push_back(col);
    ++row;
  }
  ColumnDecomposition out;
  out.rank = pivots.size();
  out.E = DMatrix(m, out.rank);
  DMatrix X(out.rank, n);
  for (std::size_t k = 0; k < out.rank; ++k) {
    for (std::size_t r = 0; r < m; ++r) out.E(r, k) = C(r, pivots[k]);
    for (std::size_t c = 0; c < n; ++c) X(k, c) = R(k, c);
  }
  out.D = X.flat();
  return out;
}

struct ModeClass {
  double a = 0;
  double C = 0;
  ModeLabels labels;
};

namespace detail {

inline bool near(double x, double y, double tol) { return std::abs(x - y) <= tol; }

}  // namespace detail

/// Groups the eigenvalues of the doubled form into per-mode pairs and reports (a, C) for each.
inline std::vector<ModeClass> classify_modes(const DMatrix& P, double tol = 1e-8) {
  if (!P.is_square()) throw Error(ErrorCode::DimensionMismatch, "classify_modes needs a square matrix");
  const std::size_t n = P.rows();
  if (n == 0) return {};
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(to_doubled(P), false);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::AmbiguousPairing, "eigenvalue computation failed");
  const double scale = std::max(1.0, P.norm());
  const double ztol = tol * scale;

  std::vector<cplx> complex_vals;
  std::vector<double> real_vals;
  for (Eigen::Index q = 0; q < es.eigenvalues().size(); ++q) {
    const cplx l = es.eigenvalues()(q);
    if (std::abs(l.imag()) <= ztol)
      real_vals.push_back(l.real());
    else
      complex_vals.push_back(l);
  }

  std::vector<std::pair<cplx, cplx>> pairs;
  // Complex eigenvalues pair with their conjugates.
  std::vector<bool> used(complex_vals.size(), false);
  std::sort(complex_vals.begin(), complex_vals.end(), [](cplx x, cplx y) {
    return x.imag() != y.imag() ? x.imag() > y.imag() : x.real() < y.real();
  });
  for (std::size_t p = 0; p < complex_vals.size(); ++p) {
    if (used[p]) continue;
    used[p] = true;
    std::size_t best = complex_vals.size();
    double best_d = 0;
    for (std::size_t q = 0; q < complex_vals.size(); ++q) {
      if (used[q]) continue;
      const double d = std::abs(complex_vals[q] - std::conj(complex_vals[p]));
      if (best == complex_vals.size() || d < best_d) best = q, best_d = d;
    }
    if (best == complex_vals.size() || best_d > 1e3 * ztol)
      throw Error(ErrorCode::AmbiguousPairing, "complex eigenvalue without conjugate partner");
    used[best] = true;
    pairs.emplace_back(complex_vals[p], complex_vals[best]);
  }

  if (real_vals.size() % 2) throw Error(ErrorCode::AmbiguousPairing, "odd number of real eigenvalues");
  std::sort(real_vals.begin(), real_vals.end());
  const std::size_t nr = real_vals.size();
  if (nr == 2) {
    pairs.emplace_back(real_vals[0], real_vals[1]);
  } else if (nr > 2) {
    // Nested pairing when the real spectrum is symmetric about a common mean.
    bool symmetric = true;
    const double mean0 = 0.5 * (real_vals.front() + real_vals.back());
    for (std::size_t p = 0; p < nr / 2; ++p)
      if (!detail::near(0.5 * (real_vals[p] + real_vals[nr - 1 - p]), mean0, 1e3 * ztol)) symmetric = false;
    if (symmetric) {
      for (std::size_t p = 0; p < nr / 2; ++p) pairs.emplace_back(real_vals[p], real_vals[nr - 1 - p]);
    } else {
      // Adjacent pairing when pairs form separated clusters.
      for (std::size_t p = 0; p + 1 < nr; p += 2) {
        const double intra = real_vals[p + 1] - real_vals[p];
        const double left = p > 0 ? real_vals[p] - real_vals[p - 1] : INFINITY;
        const double right = p + 2 < nr ? real_vals[p + 2] - real_vals[p + 1] : INFINITY;
        if (!(intra < left && intra < right))
          throw Error(ErrorCode::AmbiguousPairing, "real eigenvalues do not separate into mode pairs");
        pairs.emplace_back(real_vals[p], real_vals[p + 1]);
      }
    }
  }

  std::vector<ModeClass> modes;
  for (const auto& [l1, l2] : pairs) {
    ModeClass m;
    m.a = 0.5 * (l1 + l2).real();
    const cplx h = 0.5 * (l1 - l2);
    m.C = (h * h).real();
    if (std::abs(m.a) <= ztol) m.a = 0;
    if (std::abs(m.C) <= ztol * scale) m.C = 0;
    m.labels = labels({m.a, m.C}, ztol);
    modes.push_back(m);
  }
  std::sort(modes.begin(), modes.end(), [](const ModeClass& x, const ModeClass& y) {
    return x.a != y.a ? x.a < y.a : x.C < y.C;
  });
  return modes;
}

/// Literal "[ d(..),d(..) ; d(..),d(..) ]".
inline std::string to_literal(const DMatrix& a) {
  std::string s = "[";
  for (std::size_t r = 0; r < a.rows(); ++r) {
    if (r) s += ";";
    for (std::size_t c = 0; c < a.cols(); ++c) {
      if (c) s += ",";
      s += to_literal(a(r, c));
    }
  }
  return s + "]";
}

}  // namespace qnet
