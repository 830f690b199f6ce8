#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "dmatrix.hpp"
#include "dring.hpp"
#include "error.hpp"

namespace qnet {

enum class Side { Plus = 1, Minus = -1 };

namespace detail {

/// Doubled form of the flat of a matrix given in doubled form.
inline Eigen::MatrixXcd flat_doubled(const Eigen::MatrixXcd& m) {
  Eigen::MatrixXcd out(m.cols(), m.rows());
  for (Eigen::Index r = 0; r < m.cols(); ++r)
    for (Eigen::Index c = 0; c < m.rows(); ++c) {
      const cplx v = std::conj(m(c, r));
      out(r, c) = ((r % 2) == (c % 2)) ? v : -v;
    }
  return out;
}

inline Eigen::MatrixXcd scalar_identity(cplx z, Eigen::Index modes) {
  return z * Eigen::MatrixXcd::Identity(2 * modes, 2 * modes);
}

}  // namespace detail

/// Bath correlation function with its half-Laplace transforms.
class MemoryKernel {
 public:
  struct Lorentzian {
    double kappa;
    double gamma;
    std::size_t size;
  };
  struct MarkovDelta {
    DMatrix n0;
  };
  struct ExpMode {
    DMatrix E;
    DMatrix Q;
  };
  using Variant = std::variant<Lorentzian, MarkovDelta, ExpMode>;

  static MemoryKernel lorentzian(double kappa, double gamma, std::size_t size = 1) {
    if (!(kappa > 0) || !(gamma > 0) || !std::isfinite(kappa) || !std::isfinite(gamma))
      throw Error(ErrorCode::InvalidArgument, "lorentzian kernel needs kappa > 0 and gamma > 0");
    if (size == 0) throw Error(ErrorCode::InvalidArgument, "kernel size must be positive");
    return MemoryKernel(Lorentzian{kappa, gamma, size});
  }
  static MemoryKernel markov(DMatrix n0) {
    if (!n0.is_square() || n0.rows() == 0) throw Error(ErrorCode::DimensionMismatch, "N0 must be square");
    if (!is_flat_hermitian(n0)) throw Error(ErrorCode::InvalidArgument, "N0 must be flat-Hermitian");
    return MemoryKernel(MarkovDelta{std::move(n0)});
  }
  static MemoryKernel exp_mode(DMatrix E, const Generator& Q) {
    if (E.rows() != Q.modes() || E.cols() == 0)
      throw Error(ErrorCode::DimensionMismatch, "E rows must match the bath generator size");
    return MemoryKernel(ExpMode{std::move(E), Q.matrix()});
  }

  const Variant& variant() const { return v_; }

  std::size_t size() const {
    return std::visit(
        [](const auto& k) -> std::size_t {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Lorentzian>) return k.size;
          else if constexpr (std::is_same_v<K, MarkovDelta>) return k.n0.rows();
          else return k.E.cols();
        },
        v_);
  }

  /// Same kernel family and parameters, resized to k channels. Only Lorentzian kernels resize.
  MemoryKernel resized(std::size_t k) const {
    if (size() == k) return *this;
    if (const auto* l = std::get_if<Lorentzian>(&v_)) return lorentzian(l->kappa, l->gamma, k);
    throw Error(ErrorCode::DimensionMismatch, "kernel size does not match coupling width");
  }

  bool has_time_domain() const { return !std::holds_alternative<MarkovDelta>(v_); }

  DMatrix at(double t) const {
    return std::visit(
        [&](const auto& k) -> DMatrix {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Lorentzian>) {
            return DMatrix::identity(k.size) * (0.5 * k.kappa * k.gamma * std::exp(-k.gamma * std::abs(t)));
          } else if constexpr (std::is_same_v<K, MarkovDelta>) {
            throw Error(ErrorCode::Unsupported, "delta kernel has no pointwise time-domain value");
          } else {
            return k.E.flat() * expm(k.Q * t) * k.E;
          }
        },
        v_);
  }

  /// Doubled form of N+(s) or N-(s), continued analytically off the half plane of convergence.
  Eigen::MatrixXcd half_doubled(Side side, cplx s) const {
    const double sg = side == Side::Plus ? 1.0 : -1.0;
    return std::visit(
        [&](const auto& k) -> Eigen::MatrixXcd {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Lorentzian>) {
            const cplx den = sg * s + k.gamma;
            if (std::abs(den) <= 1e-12 * k.gamma) throw Error(ErrorCode::SingularAt, "kernel pole", s);
            return detail::scalar_identity(0.5 * k.kappa * k.gamma / den, static_cast<Eigen::Index>(k.size));
          } else if constexpr (std::is_same_v<K, MarkovDelta>) {
            return 0.5 * to_doubled(k.n0);
          } else {
            const Eigen::MatrixXcd Qd = to_doubled(k.Q);
            const Eigen::MatrixXcd Ed = to_doubled(k.E);
            const Eigen::MatrixXcd A = s * Eigen::MatrixXcd::Identity(Qd.rows(), Qd.cols()) - Qd;
            Eigen::MatrixXcd X;
            if (!detail::checked_solve(A, Ed, X)) throw Error(ErrorCode::SingularAt, "kernel pole", s);
            return sg * (detail::flat_doubled(Ed) * X);
          }
        },
        v_);
  }

  CDMatrix half(Side side, cplx s) const { return from_doubled(half_doubled(side, s)); }

  friend bool operator==(const MemoryKernel& x, const MemoryKernel& y) {
    if (x.v_.index() != y.v_.index()) return false;
    if (const auto* a = std::get_if<Lorentzian>(&x.v_)) {
      const auto& b = std::get<Lorentzian>(y.v_);
      return a->kappa == b.kappa && a->gamma == b.gamma && a->size == b.size;
    }
    if (const auto* a = std::get_if<MarkovDelta>(&x.v_)) return a->n0 == std::get<MarkovDelta>(y.v_).n0;
    const auto& a = std::get<ExpMode>(x.v_);
    const auto& b = std::get<ExpMode>(y.v_);
    return a.E == b.E && a.Q == b.Q;
  }

 private:
  explicit MemoryKernel(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

inline DMatrix kernel_time(const MemoryKernel& k, double t) { return k.at(t); }

/// Immutable s-evaluable matrix function built from resolvents, kernels, delays and pointwise algebra.
class TransferMap {
 public:
  using Function = std::function<CDMatrix(cplx)>;
  using DoubledFunction = std::function<Eigen::MatrixXcd(cplx)>;

  TransferMap() : TransferMap(zero(0, 0)) {}

  static TransferMap constant(const CDMatrix& m) {
    return make(m.rows(), m.cols(), ConstantNode{to_doubled(m)});
  }
  static TransferMap constant(const DMatrix& m) { return constant(complexify(m)); }
  static TransferMap zero(std::size_t rows, std::size_t cols) { return constant(DMatrix(rows, cols)); }
  static TransferMap identity(std::size_t n) { return constant(DMatrix::identity(n)); }

  /// s -> feedthrough + b_out (sI - a)^-1 b_in.
  static TransferMap resolvent(const DMatrix& b_out, const DMatrix& a, const DMatrix& b_in,
                               const DMatrix& feedthrough) {
    if (!a.is_square() || b_out.cols() != a.rows() || b_in.rows() != a.rows() ||
        feedthrough.rows() != b_out.rows() || feedthrough.cols() != b_in.cols())
      throw Error(ErrorCode::DimensionMismatch, "resolvent shapes do not agree");
    return make(b_out.rows(), b_in.cols(),
                ResolventNode{to_doubled(b_out), to_doubled(a), to_doubled(b_in), to_doubled(feedthrough)});
  }
  static TransferMap resolvent(const DMatrix& b_out, const DMatrix& a, const DMatrix& b_in) {
    return resolvent(b_out, a, b_in, DMatrix(b_out.rows(), b_in.cols()));
  }

  /// s -> diag(exp(-s tau_k)).
  static TransferMap delay(std::vector<double> taus) {
    for (double t : taus)
      if (!(t >= 0) || !std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "delay must be non-negative");
    const std::size_t n = taus.size();
    return make(n, n, DelayNode{std::move(taus)});
  }
  static TransferMap delay(double tau, std::size_t n) { return delay(std::vector<double>(n, tau)); }

  static TransferMap kernel_half(const MemoryKernel& k, Side side) {
    return make(k.size(), k.size(), KernelNode{k, side});
  }

  static TransferMap function(std::size_t rows, std::size_t cols, Function f) {
    return function_doubled(rows, cols, [f = std::move(f)](cplx s) { return to_doubled(f(s)); });
  }
  /// Same as function() with values given directly in doubled form.
  static TransferMap function_doubled(std::size_t rows, std::size_t cols, DoubledFunction f) {
    return make(rows, cols, FunctionNode{std::move(f)});
  }

  static TransferMap block(const std::vector<std::vector<TransferMap>>& grid) {
    if (grid.empty() || grid[0].empty()) throw Error(ErrorCode::DimensionMismatch, "empty block grid");
    std::vector<std::size_t> rh, cw;
    for (const auto& row : grid) rh.push_back(row[0].rows());
    for (const auto& m : grid[0]) cw.push_back(m.cols());
    for (std::size_t r = 0; r < grid.size(); ++r) {
      if (grid[r].size() != cw.size()) throw Error(ErrorCode::DimensionMismatch, "ragged block grid");
      for (std::size_t c = 0; c < cw.size(); ++c)
        if (grid[r][c].rows() != rh[r] || grid[r][c].cols() != cw[c])
          throw Error(ErrorCode::DimensionMismatch, "block grid shapes do not agree");
    }
    std::size_t R = 0, C = 0;
    for (auto h : rh) R += h;
    for (auto w : cw) C += w;
    std::vector<std::vector<Ptr>> ptrs;
    for (const auto& row : grid) {
      ptrs.emplace_back();
      for (const auto& m : row) ptrs.back().push_back(m.node_);
    }
    return make(R, C, BlockNode{std::move(ptrs), rh, cw});
  }

  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }

  Eigen::MatrixXcd eval_doubled(cplx s) const { return eval_node(*node_, s); }
  CDMatrix operator()(cplx s) const { return from_doubled(eval_doubled(s)); }
  CDMatrix eval(cplx s) const { return (*this)(s); }

  friend TransferMap operator+(const TransferMap& x, const TransferMap& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols()) throw Error(ErrorCode::DimensionMismatch, "sum shape mismatch");
    return make(x.rows(), x.cols(), SumNode{x.node_, y.node_, 1.0});
  }
  friend TransferMap operator-(const TransferMap& x, const TransferMap& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols()) throw Error(ErrorCode::DimensionMismatch, "sum shape mismatch");
    return make(x.rows(), x.cols(), SumNode{x.node_, y.node_, -1.0});
  }
  friend TransferMap operator*(const TransferMap& x, const TransferMap& y) {
    if (x.cols() != y.rows()) throw Error(ErrorCode::DimensionMismatch, "product shape mismatch");
    return make(x.rows(), y.cols(), ProductNode{x.node_, y.node_});
  }
  TransferMap operator-() const { return zero(rows(), cols()) - *this; }

  TransferMap inverse() const {
    if (rows() != cols()) throw Error(ErrorCode::DimensionMismatch, "inverse of a non-square map");
    return make(rows(), cols(), InverseNode{node_});
  }
  /// s -> G(-conj(s))-flat.
  TransferMap tilde() const { return make(cols(), rows(), TildeNode{node_}); }

 private:
  struct ConstantNode {
    Eigen::MatrixXcd m;
  };
  struct ResolventNode {
    Eigen::MatrixXcd b_out, a, b_in, feed;
  };
  struct DelayNode {
    std::vector<double> taus;
  };
  struct KernelNode {
    MemoryKernel kernel;
    Side side;
  };
  struct FunctionNode {
    DoubledFunction f;
  };
  struct Node;
  using Ptr = std::shared_ptr<const Node>;
  struct BlockNode {
    std::vector<std::vector<Ptr>> grid;
    std::vector<std::size_t> row_heights, col_widths;
  };
  struct SumNode {
    Ptr x, y;
    double sign;
  };
  struct ProductNode {
    Ptr x, y;
  };
  struct InverseNode {
    Ptr x;
  };
  struct TildeNode {
    Ptr x;
  };
  using Body = std::variant<ConstantNode, ResolventNode, DelayNode, KernelNode, FunctionNode, BlockNode, SumNode,
                            ProductNode, InverseNode, TildeNode>;
  struct Node {
    std::size_t rows, cols;
    Body body;
  };

  explicit TransferMap(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  template <typename B>
  static TransferMap make(std::size_t r, std::size_t c, B&& body) {
    return TransferMap(std::make_shared<const Node>(Node{r, c, Body(std::forward<B>(body))}));
  }

  static Eigen::MatrixXcd eval_node(const Node& n, cplx s) {
    return std::visit([&](const auto& b) { return eval_body(n, b, s); }, n.body);
  }

  static Eigen::MatrixXcd eval_body(const Node&, const ConstantNode& b, cplx) { return b.m; }
  static Eigen::MatrixXcd eval_body(const Node&, const ResolventNode& b, cplx s) {
    const Eigen::MatrixXcd A = s * Eigen::MatrixXcd::Identity(b.a.rows(), b.a.cols()) - b.a;
    Eigen::MatrixXcd X;
    if (!detail::checked_solve(A, b.b_in, X)) throw Error(ErrorCode::SingularAt, "resolvent pole", s);
    return b.feed + b.b_out * X;
  }
  static Eigen::MatrixXcd eval_body(const Node&, const DelayNode& b, cplx s) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2 * b.taus.size(), 2 * b.taus.size());
    for (std::size_t k = 0; k < b.taus.size(); ++k) {
      const cplx z = b.taus[k] == 0 ? cplx(1) : std::exp(-s * b.taus[k]);
      m(2 * k, 2 * k) = z;
      m(2 * k + 1, 2 * k + 1) = z;
    }
    return m;
  }
  static Eigen::MatrixXcd eval_body(const Node&, const KernelNode& b, cplx s) {
    return b.kernel.half_doubled(b.side, s);
  }
  static Eigen::MatrixXcd eval_body(const Node& n, const FunctionNode& b, cplx s) {
    Eigen::MatrixXcd v = b.f(s);
    if (v.rows() != static_cast<Eigen::Index>(2 * n.rows) || v.cols() != static_cast<Eigen::Index>(2 * n.cols))
      throw Error(ErrorCode::DimensionMismatch, "function map returned a matrix of the wrong shape");
    return v;
  }
  static Eigen::MatrixXcd eval_body(const Node& n, const BlockNode& b, cplx s) {
    Eigen::MatrixXcd m(2 * n.rows, 2 * n.cols);
    Eigen::Index r0 = 0;
    for (std::size_t r = 0; r < b.grid.size(); ++r) {
      Eigen::Index c0 = 0;
      for (std::size_t c = 0; c < b.grid[r].size(); ++c) {
        const auto h = static_cast<Eigen::Index>(2 * b.row_heights[r]);
        const auto w = static_cast<Eigen::Index>(2 * b.col_widths[c]);
        m.block(r0, c0, h, w) = eval_node(*b.grid[r][c], s);
        c0 += w;
      }
      r0 += static_cast<Eigen::Index>(2 * b.row_heights[r]);
    }
    return m;
  }
  static Eigen::MatrixXcd eval_body(const Node&, const SumNode& b, cplx s) {
    return eval_node(*b.x, s) + b.sign * eval_node(*b.y, s);
  }
  static Eigen::MatrixXcd eval_body(const Node&, const ProductNode& b, cplx s) {
    return eval_node(*b.x, s) * eval_node(*b.y, s);
  }
  static Eigen::MatrixXcd eval_body(const Node&, const InverseNode& b, cplx s) {
    Eigen::MatrixXcd inv;
    if (!detail::checked_inverse(eval_node(*b.x, s), inv)) throw Error(ErrorCode::SingularAt, "singular inverse", s);
    return inv;
  }
  static Eigen::MatrixXcd eval_body(const Node&, const TildeNode& b, cplx s) {
    return detail::flat_doubled(eval_node(*b.x, -std::conj(s)));
  }

  std::shared_ptr<const Node> node_;
};

inline CDMatrix tf_eval(const TransferMap& g, cplx s) { return g(s); }
inline TransferMap tf_tilde(const TransferMap& g) { return g.tilde(); }
inline TransferMap kernel_Npm(const MemoryKernel& k, Side side) { return TransferMap::kernel_half(k, side); }

/// M(s) = D-flat (sI - P)^-1 D.
inline TransferMap system_M(const Generator& P, const DMatrix& D) {
  if (D.rows() != P.modes()) throw Error(ErrorCode::DimensionMismatch, "coupling rows must equal mode count");
  return TransferMap::resolvent(D.flat(), P.matrix(), D);
}

/// (sI - P)^-1.
inline TransferMap resolvent_of(const DMatrix& P) {
  const auto n = P.rows();
  return TransferMap::resolvent(DMatrix::identity(n), P, DMatrix::identity(n));
}

/// Upper-triangular coefficients: entry (k,j), k <= j, is make_dnum(alpha(k,j), beta(k,j));
/// the lower triangle follows from skewness and each diagonal gains omega_j * i.
inline Generator generator_from_hamiltonian(std::size_t n, const std::vector<double>& omegas,
                                            const Eigen::MatrixXcd& alpha, const Eigen::MatrixXcd& beta) {
  const auto N = static_cast<Eigen::Index>(n);
  if (omegas.size() != n || alpha.rows() != N || alpha.cols() != N || beta.rows() != N || beta.cols() != N)
    throw Error(ErrorCode::DimensionMismatch, "hamiltonian coefficient shapes must match the mode count");
  DMatrix P(n, n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = k; j < n; ++j) {
      const auto K = static_cast<Eigen::Index>(k), J = static_cast<Eigen::Index>(j);
      DNum p = make_dnum(alpha(K, J), beta(K, J));
      if (k == j) {
        P(k, k) = p + DNum::i() * omegas[k];
      } else {
        P(k, j) = p;
        P(j, k) = -p.flat();
      }
    }
  return Generator(std::move(P));
}

inline Generator generator_from_hamiltonian(const std::vector<double>& omegas) {
  const auto n = static_cast<Eigen::Index>(omegas.size());
  return generator_from_hamiltonian(omegas.size(), omegas, Eigen::MatrixXcd::Zero(n, n),
                                    Eigen::MatrixXcd::Zero(n, n));
}

}  // namespace qnet
