#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "dmatrix.hpp"
#include "error.hpp"
#include "sfg.hpp"
#include "tfcore.hpp"

namespace qnet {

struct Coupling {
  DMatrix D;
  MemoryKernel kernel;
};

/// Modes with generator P, each coupling j feeding k_j field channels through D_j and kernel_j.
class IOSystem {
 public:
  IOSystem(Generator P, std::vector<Coupling> couplings) : P_(std::move(P)), couplings_(std::move(couplings)) {
    for (const auto& c : couplings_) {
      if (c.D.rows() != P_.modes())
        throw Error(ErrorCode::DimensionMismatch, "coupling rows must equal the mode count");
      if (c.kernel.size() != c.D.cols())
        throw Error(ErrorCode::DimensionMismatch, "kernel size must equal the coupling width");
    }
  }
  IOSystem(Generator P, DMatrix D, MemoryKernel K) : IOSystem(std::move(P), {Coupling{std::move(D), std::move(K)}}) {}

  const Generator& P() const { return P_; }
  std::size_t modes() const { return P_.modes(); }
  const std::vector<Coupling>& couplings() const { return couplings_; }

  std::size_t channels() const {
    std::size_t k = 0;
    for (const auto& c : couplings_) k += c.D.cols();
    return k;
  }

  /// [D_1 ... D_q].
  DMatrix stacked_D() const {
    DMatrix D(modes(), channels());
    std::size_t col = 0;
    for (const auto& c : couplings_) {
      D.set_block(0, col, c.D);
      col += c.D.cols();
    }
    return D;
  }

 private:
  Generator P_;
  std::vector<Coupling> couplings_;
};

/// The factors of the input-output map.
struct IOParts {
  TransferMap M, Nplus, Nminus, Gplus, Gminus, G, G_alt;
};

namespace detail {

inline TransferMap block_kernel(const IOSystem& sys, Side side) {
  const auto& cs = sys.couplings();
  if (cs.size() == 1) return TransferMap::kernel_half(cs[0].kernel, side);
  std::vector<std::vector<TransferMap>> grid(cs.size());
  for (std::size_t r = 0; r < cs.size(); ++r)
    for (std::size_t c = 0; c < cs.size(); ++c)
      grid[r].push_back(r == c ? TransferMap::kernel_half(cs[r].kernel, side)
                               : TransferMap::zero(cs[r].D.cols(), cs[c].D.cols()));
  return TransferMap::block(grid);
}

}  // namespace detail

/// G = [I - N- M][I + N+ M]^-1 together with G+-, M, N+- and the equivalent form I - (N+ + N-)[I + M N+]^-1 M.
inline IOParts io_parts(const IOSystem& sys) {
  if (sys.couplings().empty()) throw Error(ErrorCode::InvalidArgument, "system has no field coupling");
  IOParts p;
  const std::size_t k = sys.channels();
  const auto I = TransferMap::identity(k);
  p.M = system_M(sys.P(), sys.stacked_D());
  p.Nplus = detail::block_kernel(sys, Side::Plus);
  p.Nminus = detail::block_kernel(sys, Side::Minus);
  p.Gplus = (I + p.Nplus * p.M).inverse();
  p.Gminus = (I - p.Nminus * p.M).inverse();
  p.G_alt = I - (p.Nplus + p.Nminus) * (I + p.M * p.Nplus).inverse() * p.M;
  // At poles of M on the axis the product form breaks down while G stays finite; there
  // G = I - (N+ + N-) D^flat (sI - P + D N+ D^flat)^-1 D is evaluated instead.
  const TransferMap product = (I - p.Nminus * p.M) * p.Gplus;
  const Eigen::MatrixXcd Pd = to_doubled(sys.P().matrix()), Dd = to_doubled(sys.stacked_D());
  const Eigen::MatrixXcd Dflat = detail::flat_doubled(Dd);
  p.G = TransferMap::function_doubled(k, k, [product, Np = p.Nplus, Nm = p.Nminus, Pd, Dd, Dflat](cplx s) {
    try {
      return product.eval_doubled(s);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularAt) throw;
    }
    const Eigen::MatrixXcd np = Np.eval_doubled(s);
    const Eigen::MatrixXcd A = s * Eigen::MatrixXcd::Identity(Pd.rows(), Pd.cols()) - Pd + Dd * np * Dflat;
    Eigen::MatrixXcd X;
    if (!detail::checked_solve(A, Dd, X)) throw Error(ErrorCode::SingularAt, "input-output map pole", s);
    return Eigen::MatrixXcd(Eigen::MatrixXcd::Identity(np.rows(), np.cols()) - (np + Nm.eval_doubled(s)) * Dflat * X);
  });
  return p;
}

inline TransferMap io_transfer(const IOSystem& sys) {
  if (sys.couplings().size() != 1)
    throw Error(ErrorCode::InvalidArgument, "io_transfer expects exactly one coupling; use io_transfer_multi");
  return io_parts(sys).G;
}

inline TransferMap io_transfer_alternate(const IOSystem& sys) { return io_parts(sys).G_alt; }

inline TransferMap io_transfer_multi(const IOSystem& sys) { return io_parts(sys).G; }

struct Theorem2Report {
  double comm_Nplus_M = 0;
  double comm_Nminus_M = 0;
  double comm_Nplus_Nminus = 0;
  double tilde_defect = 0;      // max |G~(s) G(s) - I| over s samples
  double unitarity_defect = 0;  // max |G(iw)-flat G(iw) - I| over w samples
  bool condition_holds = false;
};

/// Doubled-form Frobenius norm of G(iw)-flat G(iw) - I.
inline double unitarity_defect(const TransferMap& G, double omega) {
  const Eigen::MatrixXcd g = G.eval_doubled(cplx(0, omega));
  return (detail::flat_doubled(g) * g - Eigen::MatrixXcd::Identity(g.cols(), g.cols())).norm();
}

inline Theorem2Report check_theorem2(const IOSystem& sys, const std::vector<cplx>& s_samples,
                                     const std::vector<double>& omegas) {
  const IOParts p = io_parts(sys);
  const auto Gt = p.G.tilde();
  Theorem2Report r;
  for (cplx s : s_samples) {
    const Eigen::MatrixXcd M = p.M.eval_doubled(s), Np = p.Nplus.eval_doubled(s), Nm = p.Nminus.eval_doubled(s);
    r.comm_Nplus_M = std::max(r.comm_Nplus_M, (Np * M - M * Np).norm());
    r.comm_Nminus_M = std::max(r.comm_Nminus_M, (Nm * M - M * Nm).norm());
    r.comm_Nplus_Nminus = std::max(r.comm_Nplus_Nminus, (Np * Nm - Nm * Np).norm());
    const Eigen::MatrixXcd g = p.G.eval_doubled(s);
    r.tilde_defect = std::max(r.tilde_defect,
                              (Gt.eval_doubled(s) * g - Eigen::MatrixXcd::Identity(g.cols(), g.cols())).norm());
  }
  for (double w : omegas) r.unitarity_defect = std::max(r.unitarity_defect, unitarity_defect(p.G, w));
  r.condition_holds = r.comm_Nplus_M < 1e-10 && r.comm_Nminus_M < 1e-10 && r.comm_Nplus_Nminus < 1e-10;
  return r;
}

/// Coefficient matrices of the (S, L, H) description: S = I, L = D-flat, H = P.
struct SLHMatrices {
  DMatrix S, L, H;
};

struct MarkovianLimit {
  TransferMap G;
  SLHMatrices slh;
  DMatrix effective_generator;  // P - D N0 D-flat / 2
};

/// G = [I - M N0/2][I + M N0/2]^-1, evaluated as I - D-flat (sI - P_eff)^-1 D N0, which is the same
/// function but stays regular at poles of (sI - P).
inline MarkovianLimit markovian_limit(const Generator& P, const DMatrix& D, const DMatrix& N0) {
  if (D.rows() != P.modes() || !N0.is_square() || N0.rows() != D.cols())
    throw Error(ErrorCode::DimensionMismatch, "markovian_limit shapes do not agree");
  if (!is_flat_hermitian(N0)) throw Error(ErrorCode::InvalidArgument, "N0 must be flat-Hermitian");
  const std::size_t k = D.cols();
  MarkovianLimit out;
  out.effective_generator = P.matrix() - D * N0 * D.flat() * 0.5;
  out.G = TransferMap::resolvent(-D.flat(), out.effective_generator, D * N0, DMatrix::identity(k));
  out.slh = {DMatrix::identity(k), D.flat(), P.matrix()};
  return out;
}

/// Two-port splitter with total matrix [[t1, r1], [r2, t2]].
struct BeamSplitter {
  DMatrix t1, r1, r2, t2;

  DMatrix total() const {
    DMatrix m(t1.rows() + r2.rows(), t1.cols() + r1.cols());
    m.set_block(0, 0, t1);
    m.set_block(0, t1.cols(), r1);
    m.set_block(t1.rows(), 0, r2);
    m.set_block(t1.rows(), t1.cols(), t2);
    return m;
  }
};

struct DelayLine {
  std::vector<double> taus;
  TransferMap map() const { return TransferMap::delay(taus); }
};

using StaticComponent = std::variant<BeamSplitter, DelayLine>;

inline TransferMap as_transfer(const StaticComponent& c) {
  if (const auto* d = std::get_if<DelayLine>(&c)) return d->map();
  return TransferMap::constant(std::get<BeamSplitter>(c).total());
}

inline BeamSplitter beam_splitter(DMatrix t1, DMatrix r1, DMatrix r2, DMatrix t2, double tol = 1e-10) {
  if (!t1.is_square() || !t2.is_square() || r1.rows() != t1.rows() || r1.cols() != t2.cols() ||
      r2.rows() != t2.rows() || r2.cols() != t1.cols())
    throw Error(ErrorCode::DimensionMismatch, "splitter blocks do not form a square total matrix");
  BeamSplitter b{std::move(t1), std::move(r1), std::move(r2), std::move(t2)};
  const DMatrix T = b.total();
  const Eigen::MatrixXcd d = to_doubled(T);
  const double complex_defect = (d.adjoint() * d - Eigen::MatrixXcd::Identity(d.cols(), d.cols())).norm();
  if (!(flat_unitary_defect(T) <= tol) || !(complex_defect <= tol))
    throw Error(ErrorCode::NotPassive, "splitter total matrix is not flat-unitary and unitary");
  return b;
}

inline DelayLine delay_line(double tau, std::size_t width = 1) {
  if (!(tau >= 0) || !std::isfinite(tau)) throw Error(ErrorCode::InvalidArgument, "delay must be non-negative");
  return {std::vector<double>(width, tau)};
}

/// Per-channel delays tau_k = length / speed_k.
inline DelayLine dispersive_delay(double length, const std::vector<double>& speeds) {
  if (!(length >= 0)) throw Error(ErrorCode::InvalidArgument, "length must be non-negative");
  DelayLine d;
  for (double c : speeds) {
    if (!(c > 0)) throw Error(ErrorCode::InvalidArgument, "propagation speeds must be positive");
    d.taus.push_back(length / c);
  }
  return d;
}

/// Output of sys1 feeding the input of sys2.
inline TransferMap series_product(const IOSystem& sys1, const IOSystem& sys2) {
  if (sys1.couplings().size() != 1 || sys2.couplings().size() != 1)
    throw Error(ErrorCode::InvalidArgument, "series product expects single-coupling systems");
  if (sys1.channels() != sys2.channels())
    throw Error(ErrorCode::DimensionMismatch, "series product needs equal channel widths");
  if (!(sys1.couplings()[0].kernel == sys2.couplings()[0].kernel))
    throw Error(ErrorCode::InvalidArgument, "series product needs both systems to share one kernel");
  return io_transfer(sys2) * io_transfer(sys1);
}

/// Closed loop of plant P and auxiliary system Q coupled through C, acting on (x0, w0).
inline TransferMap direct_feedback_closed_loop(const Generator& P, const Generator& Q, const DMatrix& C) {
  const std::size_t n = P.modes(), m = Q.modes();
  if (C.rows() != m || C.cols() != n) throw Error(ErrorCode::DimensionMismatch, "C must be m x n");
  const auto Gxw = TransferMap::resolvent(DMatrix::identity(n), P.matrix(), C.flat());
  const auto Gwx = TransferMap::resolvent(-DMatrix::identity(m), Q.matrix(), C);
  const auto Lx_inv = (TransferMap::identity(n) - Gxw * Gwx).inverse();
  const auto Lw_inv = (TransferMap::identity(m) - Gwx * Gxw).inverse();
  return TransferMap::block({{Lx_inv, Lx_inv * Gxw}, {Lw_inv * Gwx, Lw_inv}});
}

/// Single mode at omega0 coupled to two baths sharing mode frequencies; bath mode k couples with
/// strengths g1[k], g2[k], and optionally mode k of bath 1 couples to mode k of bath 2 with f[k].
struct DecoherenceModel {
  double omega0 = 0;
  std::vector<double> bath_omegas;
  std::vector<cplx> g1, g2;
  std::optional<std::vector<cplx>> f;

  void validate() const {
    const std::size_t m = bath_omegas.size();
    if (g1.size() != m || g2.size() != m || (f && f->size() != m))
      throw Error(ErrorCode::DimensionMismatch, "bath parameter lists must have equal length");
  }
  Generator P() const { return Generator(DMatrix{{DNum::i() * omega0}}); }
  Generator Q() const {
    std::vector<DNum> d;
    for (double w : bath_omegas) d.push_back(DNum::i() * w);
    return Generator(DMatrix::diagonal(d));
  }
  DMatrix C(const std::vector<cplx>& g) const {
    DMatrix c(g.size(), 1);
    for (std::size_t k = 0; k < g.size(); ++k) c(k, 0) = make_dnum(g[k], 0);
    return c;
  }
  DMatrix F() const {
    std::vector<DNum> d;
    for (cplx x : *f) d.push_back(make_dnum(x, 0));
    return DMatrix::diagonal(d);
  }
};

struct DecoherenceSpectrum {
  TransferMap D;            // shift of the plant's resolvent
  TransferMap closed_loop;  // x(s) = [s e - P + D(s)]^-1 x(0)
};

/// D(s) = sum_k (|g1k|^2 + |g2k|^2) (s e - w_k i + |f_k|^2 (s e - w_k i)^-1)^-1
///        + 2 Im(conj(f_k g1k) g2k) i (s e - w_k i)^-1 (s e - w_k i + |f_k|^2 (s e - w_k i)^-1)^-1.
/// The second sum comes from the loops that cross between the baths; it vanishes for real couplings.
inline DecoherenceSpectrum decoherence_spectrum(const DecoherenceModel& model) {
  model.validate();
  auto D = TransferMap::function(1, 1, [model](cplx s) {
    CDNum acc;
    for (std::size_t k = 0; k < model.bath_omegas.size(); ++k) {
      const CDNum base = cscalar(s) - complexify(DNum::i() * model.bath_omegas[k]);
      const CDNum r = base.inverse();
      const double f2 = model.f ? std::norm((*model.f)[k]) : 0.0;
      const CDNum inner = (base + r * cplx(f2)).inverse();
      acc += inner * cplx(std::norm(model.g1[k]) + std::norm(model.g2[k]));
      if (model.f) {
        const double cross = 2 * std::imag(std::conj((*model.f)[k] * model.g1[k]) * model.g2[k]);
        acc += complexify(DNum::i() * cross) * r * inner;
      }
    }
    return CDMatrix{{acc}};
  });
  const DNum P = model.P().matrix()(0, 0);
  const auto sI_minus_P = TransferMap::function(1, 1, [P](cplx s) { return CDMatrix{{cscalar(s) - complexify(P)}}; });
  return {D, (sI_minus_P + D).inverse()};
}

/// Signal flow graph of the plant and the two baths: nodes x0, x, w1, w2 (plus inputs w10, w20).
inline SignalFlowGraph decoherence_graph(const DecoherenceModel& model) {
  model.validate();
  const std::size_t m = model.bath_omegas.size();
  const DMatrix P = model.P().matrix(), Q = model.Q().matrix();
  const DMatrix C1 = model.C(model.g1), C2 = model.C(model.g2);
  SignalFlowGraph g;
  g.add_node("x0", 1);
  g.add_node("x", 1);
  g.add_node("w10", m);
  g.add_node("w20", m);
  g.add_node("w1", m);
  g.add_node("w2", m);
  g.add_arc("x0", "x", TransferMap::identity(1));
  g.add_arc("w10", "w1", TransferMap::identity(m));
  g.add_arc("w20", "w2", TransferMap::identity(m));
  g.add_arc("w1", "x", TransferMap::resolvent(DMatrix::identity(1), P, C1.flat()));
  g.add_arc("w2", "x", TransferMap::resolvent(DMatrix::identity(1), P, C2.flat()));
  g.add_arc("x", "w1", TransferMap::resolvent(-DMatrix::identity(m), Q, C1));
  g.add_arc("x", "w2", TransferMap::resolvent(-DMatrix::identity(m), Q, C2));
  if (model.f) {
    const DMatrix F = model.F();
    g.add_arc("w2", "w1", TransferMap::resolvent(DMatrix::identity(m), Q, F.flat()));
    g.add_arc("w1", "w2", TransferMap::resolvent(-DMatrix::identity(m), Q, F));
  }
  return g;
}

/// Cavity output fed back into its input through a splitter and a delay.
/// Nodes: b1 (external input), b2 (cavity output), c1 (external output), c2 (cavity input).
inline SignalFlowGraph indirect_feedback_network(const IOSystem& cavity, const BeamSplitter& sp, double tau) {
  const std::size_t k = cavity.channels();
  if (sp.t1.rows() != k || sp.t2.rows() != k)
    throw Error(ErrorCode::DimensionMismatch, "splitter ports must match the cavity channel width");
  const auto d = delay_line(tau, k).map();
  SignalFlowGraph g;
  for (auto n : {"b1", "b2", "c1", "c2"}) g.add_node(n, k);
  g.add_arc("b1", "c1", TransferMap::constant(sp.r1));
  g.add_arc("b1", "c2", TransferMap::constant(sp.t1));
  g.add_arc("b2", "c1", d * TransferMap::constant(sp.t2));
  g.add_arc("b2", "c2", d * TransferMap::constant(sp.r2));
  g.add_arc("c2", "b2", io_transfer_multi(cavity));
  return g;
}

/// r1 + t2 (e^{tau s} Ga^-1 - r2)^-1 t1.
inline TransferMap indirect_feedback_closed_form(const IOSystem& cavity, const BeamSplitter& sp, double tau) {
  const std::size_t k = cavity.channels();
  const auto Ga = io_transfer_multi(cavity);
  auto advance = TransferMap::function(k, k, [k, tau](cplx s) {
    CDMatrix m(k, k);
    for (std::size_t j = 0; j < k; ++j) m(j, j) = cscalar(std::exp(s * tau));
    return m;
  });
  const auto c = [](const DMatrix& x) { return TransferMap::constant(x); };
  return c(sp.r1) + c(sp.t2) * (advance * Ga.inverse() - c(sp.r2)).inverse() * c(sp.t1);
}

}  // namespace qnet
