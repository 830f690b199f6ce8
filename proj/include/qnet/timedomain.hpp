#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "dmatrix.hpp"
#include "error.hpp"
#include "netlib.hpp"
#include "tfcore.hpp"

namespace qnet {

/// Unit impulse at t = 0, applied exactly as a jump of the state.
struct Impulse {};
/// Hann-tapered linear chirp e^{i phi(t)} sweeping w_lo to w_hi over the first 80% of the horizon.
struct Chirp {
  double w_lo;
  double w_hi;
};
/// e^{i omega t} switched on at t = 0.
struct Sinusoid {
  double omega;
};
using InputSignal = std::variant<Impulse, Chirp, Sinusoid>;

struct SimulationConfig {
  double dt = 1e-3;
  double T = 200;
  InputSignal input = Impulse{};
  /// Driven entry of the doubled input vector; all other entries stay zero.
  std::size_t channel = 0;
  double amplitude = 1;
  /// Doubled initial state; zero when absent.
  std::optional<Eigen::VectorXcd> x0;
  double divergence_limit = 1e9;
};

/// Sampled first-moment trajectories in doubled form, one column per time step.
struct TimeSeries {
  double dt = 0;
  Eigen::VectorXd t;
  Eigen::MatrixXcd x;
  Eigen::MatrixXcd w_in;
  Eigen::MatrixXcd w_out;
  /// Weight of a delta at t = 0 present in both w_in and w_out but not in the samples.
  Eigen::VectorXcd impulse;
  /// w_out(t) for t < 0 equals tail_out * exp(-tail_generator t) * tail_state.
  Eigen::MatrixXcd tail_out;
  Eigen::MatrixXcd tail_generator;
  Eigen::VectorXcd tail_state;
};

namespace detail {

/// N(t) = E^flat e^{Q_plus t} E for t > 0 and E^flat e^{Q_minus |t|} E for t < 0, all doubled.
struct KernelRealization {
  Eigen::MatrixXcd E;
  Eigen::MatrixXcd Q_plus;
  Eigen::MatrixXcd Q_minus;
};

inline KernelRealization realize(const MemoryKernel& k) {
  return std::visit(
      [&](const auto& v) -> KernelRealization {
        using K = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<K, MemoryKernel::Lorentzian>) {
          const auto n = static_cast<Eigen::Index>(2 * v.size);
          const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);
          return {std::sqrt(0.5 * v.kappa * v.gamma) * I, -v.gamma * I, -v.gamma * I};
        } else if constexpr (std::is_same_v<K, MemoryKernel::MarkovDelta>) {
          throw Error(ErrorCode::Unsupported, "delta kernel cannot be simulated in the time domain");
        } else {
          const Eigen::MatrixXcd Q = to_doubled(v.Q);
          return {to_doubled(v.E), Q, -Q};
        }
      },
      k.variant());
}

inline KernelRealization realize(const IOSystem& sys) {
  std::vector<KernelRealization> parts;
  Eigen::Index rows = 0, cols = 0;
  for (const auto& c : sys.couplings()) {
    parts.push_back(realize(c.kernel));
    rows += parts.back().E.rows();
    cols += parts.back().E.cols();
  }
  KernelRealization out{Eigen::MatrixXcd::Zero(rows, cols), Eigen::MatrixXcd::Zero(rows, rows),
                        Eigen::MatrixXcd::Zero(rows, rows)};
  Eigen::Index r = 0, c = 0;
  for (const auto& p : parts) {
    out.E.block(r, c, p.E.rows(), p.E.cols()) = p.E;
    out.Q_plus.block(r, r, p.Q_plus.rows(), p.Q_plus.cols()) = p.Q_plus;
    out.Q_minus.block(r, r, p.Q_minus.rows(), p.Q_minus.cols()) = p.Q_minus;
    r += p.E.rows();
    c += p.E.cols();
  }
  return out;
}

inline double slowest_timescale(const IOSystem& sys) {
  double tau = 0;
  for (const auto& c : sys.couplings())
    if (const auto* l = std::get_if<MemoryKernel::Lorentzian>(&c.kernel.variant()))
      tau = std::max({tau, 1 / l->gamma, 1 / l->kappa});
  return tau;
}

inline cplx input_value(const SimulationConfig& cfg, double t) {
  return std::visit(
      [&](const auto& in) -> cplx {
        using I = std::decay_t<decltype(in)>;
        if constexpr (std::is_same_v<I, Impulse>) {
          return 0.0;
        } else if constexpr (std::is_same_v<I, Sinusoid>) {
          return cfg.amplitude * std::exp(cplx(0, in.omega * t));
        } else {
          const double span = 0.8 * cfg.T;
          if (t < 0 || t > span) return 0.0;
          const double window = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * t / span);
          const double phase = in.w_lo * t + 0.5 * (in.w_hi - in.w_lo) * t * t / span;
          return cfg.amplitude * window * std::exp(cplx(0, phase));
        }
      },
      cfg.input);
}

}  // namespace detail

inline void validate(const SimulationConfig& cfg, const IOSystem& sys) {
  if (!(cfg.dt > 0) || !std::isfinite(cfg.dt)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  if (!(cfg.T > cfg.dt) || !std::isfinite(cfg.T)) throw Error(ErrorCode::InvalidArgument, "horizon must exceed dt");
  if (cfg.T <= 10 * detail::slowest_timescale(sys))
    throw Error(ErrorCode::InvalidArgument, "horizon must exceed ten times the slowest kernel timescale");
  if (cfg.channel >= 2 * sys.channels()) throw Error(ErrorCode::InvalidArgument, "input channel out of range");
  if (cfg.x0 && cfg.x0->size() != static_cast<Eigen::Index>(2 * sys.modes()))
    throw Error(ErrorCode::DimensionMismatch, "initial state must have doubled mode length");
  if (const auto* c = std::get_if<Chirp>(&cfg.input); c && !(c->w_lo < c->w_hi))
    throw Error(ErrorCode::InvalidArgument, "chirp needs w_lo < w_hi");
}

/// Integrates dx/dt = P x - int_0^t D N(t-u) D^flat x(u) du - D w_in(t) with RK4 on the doubled form.
/// The output w_out(t) = w_in(t) + int_0^inf N(t-u) D^flat x(u) du; its part from u > t is
/// accumulated by a backward exponential trapezoid sweep once x is known.
inline TimeSeries simulate_io(const IOSystem& sys, const SimulationConfig& cfg) {
  for (const auto& c : sys.couplings())
    if (!c.kernel.has_time_domain())
      throw Error(ErrorCode::Unsupported, "delta kernel cannot be simulated in the time domain");
  validate(cfg, sys);

  const auto kr = detail::realize(sys);
  const Eigen::MatrixXcd P = to_doubled(sys.P().matrix());
  const Eigen::MatrixXcd D = to_doubled(sys.stacked_D());
  const Eigen::MatrixXcd Dflat = detail::flat_doubled(D);
  const Eigen::MatrixXcd Eflat = detail::flat_doubled(kr.E);
  const Eigen::Index nx = P.rows(), nz = kr.Q_plus.rows(), nw = D.cols(), ny = nx + nz;

  // y = (x, z) with dz/dt = Q_plus z + E D^flat x, so the causal convolution is E^flat z.
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(ny, ny);
  A.topLeftCorner(nx, nx) = P;
  A.topRightCorner(nx, nz) = -D * Eflat;
  A.bottomLeftCorner(nz, nx) = kr.E * Dflat;
  A.bottomRightCorner(nz, nz) = kr.Q_plus;
  Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(ny, nw);
  B.topRows(nx) = -D;

  const auto steps = static_cast<Eigen::Index>(std::llround(cfg.T / cfg.dt));
  const double h = cfg.dt;
  TimeSeries ts;
  ts.dt = h;
  ts.t = Eigen::VectorXd::LinSpaced(steps + 1, 0.0, h * static_cast<double>(steps));
  ts.x.resize(nx, steps + 1);
  ts.w_in = Eigen::MatrixXcd::Zero(nw, steps + 1);
  ts.w_out.resize(nw, steps + 1);
  ts.impulse = Eigen::VectorXcd::Zero(nw);

  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(ny);
  if (cfg.x0) y.head(nx) = *cfg.x0;
  const bool impulse = std::holds_alternative<Impulse>(cfg.input);
  const auto ch = static_cast<Eigen::Index>(cfg.channel);
  if (impulse) {
    ts.impulse(ch) = cfg.amplitude;
    y.head(nx) -= D.col(ch) * cfg.amplitude;
  }

  Eigen::MatrixXcd Z(nz, steps + 1);
  Eigen::VectorXcd k1(ny), k2(ny), k3(ny), k4(ny), tmp(ny);
  const Eigen::VectorXcd Bcol = B.col(ch);
  auto rhs = [&](const Eigen::VectorXcd& state, cplx u, Eigen::VectorXcd& out) {
    out.noalias() = A * state;
    if (u != 0.0) out += Bcol * u;
  };
  for (Eigen::Index n = 0;; ++n) {
    ts.x.col(n) = y.head(nx);
    Z.col(n) = y.tail(nz);
    if (!impulse) ts.w_in(ch, n) = detail::input_value(cfg, ts.t(n));
    if (!y.allFinite() || y.norm() > cfg.divergence_limit)
      throw Error(ErrorCode::UnstableSimulation, "state norm diverged at t = " + format_double(ts.t(n)));
    if (n == steps) break;
    const double t = ts.t(n);
    const cplx u0 = impulse ? 0.0 : detail::input_value(cfg, t);
    const cplx uh = impulse ? 0.0 : detail::input_value(cfg, t + h / 2);
    const cplx u1 = impulse ? 0.0 : detail::input_value(cfg, t + h);
    rhs(y, u0, k1);
    tmp = y + (h / 2) * k1;
    rhs(tmp, uh, k2);
    tmp = y + (h / 2) * k2;
    rhs(tmp, uh, k3);
    tmp = y + h * k3;
    rhs(tmp, u1, k4);
    y += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
  }

  // v(t) = int_t^inf e^{Q_minus (u-t)} E D^flat x(u) du, swept backward from v(T) = 0.
  const Eigen::MatrixXcd Phi = (kr.Q_minus * h).exp();
  const Eigen::MatrixXcd G = kr.E * Dflat;
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(nz);
  Eigen::VectorXcd g_next = G * ts.x.col(steps);
  ts.w_out.col(steps) = ts.w_in.col(steps) + Eflat * Z.col(steps);
  for (Eigen::Index n = steps - 1; n >= 0; --n) {
    const Eigen::VectorXcd g = G * ts.x.col(n);
    v = Phi * (v + (h / 2) * g_next) + (h / 2) * g;
    g_next = g;
    ts.w_out.col(n) = ts.w_in.col(n) + Eflat * (Z.col(n) + v);
  }
  ts.tail_out = Eflat;
  ts.tail_generator = kr.Q_minus;
  ts.tail_state = v;
  return ts;
}

namespace detail {

/// Trapezoidal int_0^T f(t) e^{-i w t} dt over the sampled columns.
inline Eigen::VectorXcd sampled_transform(const Eigen::MatrixXcd& f, double dt, double w) {
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(f.rows());
  const cplx step = std::exp(cplx(0, -w * dt));
  cplx phase = 1.0;
  const Eigen::Index last = f.cols() - 1;
  for (Eigen::Index n = 0; n <= last; ++n) {
    const double weight = (n == 0 || n == last) ? 0.5 : 1.0;
    acc += (weight * phase) * f.col(n);
    if ((n & 1023) == 1023) phase = std::exp(cplx(0, -w * dt * static_cast<double>(n + 1)));
    else phase *= step;
  }
  return acc * dt;
}

inline double tail_energy_fraction(const TimeSeries& ts) {
  const Eigen::MatrixXcd r = ts.w_out - ts.w_in;
  const Eigen::Index n = r.cols(), start = n - std::max<Eigen::Index>(1, n / 10);
  const double total = r.squaredNorm();
  if (total == 0) return 0;
  return r.rightCols(n - start).squaredNorm() / total;
}

}  // namespace detail

/// Output-over-input spectra at each omega: entry r is W_out,r(i w) / W_in,channel(i w).
inline std::vector<Eigen::VectorXcd> empirical_frequency_response(const TimeSeries& ts, const SimulationConfig& cfg,
                                                                  const std::vector<double>& omegas) {
  if (std::holds_alternative<Sinusoid>(cfg.input))
    throw Error(ErrorCode::InvalidArgument, "frequency response needs an impulse or chirp input");
  if (detail::tail_energy_fraction(ts) > 0.01)
    throw Error(ErrorCode::InsufficientDecay, "response has not decayed by the end of the horizon");
  const auto ch = static_cast<Eigen::Index>(cfg.channel);
  std::vector<Eigen::VectorXcd> out;
  out.reserve(omegas.size());
  for (double w : omegas) {
    const cplx s(0, w);
    const Eigen::MatrixXcd shifted =
        ts.tail_generator + s * Eigen::MatrixXcd::Identity(ts.tail_generator.rows(), ts.tail_generator.cols());
    const Eigen::VectorXcd tail = -(ts.tail_out * shifted.partialPivLu().solve(ts.tail_state));
    const Eigen::VectorXcd num = detail::sampled_transform(ts.w_out, ts.dt, w) + tail + ts.impulse;
    const cplx den = detail::sampled_transform(ts.w_in.row(ch), ts.dt, w)(0) + ts.impulse(ch);
    if (std::abs(den) < 1e-12 * std::max(1.0, std::abs(cfg.amplitude)))
      throw Error(ErrorCode::SingularAt, "input carries no energy at this frequency", s);
    out.push_back(num / den);
  }
  return out;
}

/// Complex ratio of output to input over [T/2, 0.9 T] for a sinusoidal drive.
inline Eigen::VectorXcd steady_state_ratio(const TimeSeries& ts, const SimulationConfig& cfg) {
  if (!std::holds_alternative<Sinusoid>(cfg.input))
    throw Error(ErrorCode::InvalidArgument, "steady-state ratio needs a sinusoidal input");
  const auto ch = static_cast<Eigen::Index>(cfg.channel);
  const Eigen::Index n = ts.t.size(), lo = n / 2, hi = (9 * n) / 10;
  Eigen::VectorXcd num = Eigen::VectorXcd::Zero(ts.w_out.rows());
  double den = 0;
  for (Eigen::Index q = lo; q < hi; ++q) {
    const cplx u = ts.w_in(ch, q);
    num += ts.w_out.col(q) * std::conj(u);
    den += std::norm(u);
  }
  return num / den;
}

/// Doubled G(i w) assembled column by column from one impulse simulation per input channel.
inline std::vector<Eigen::MatrixXcd> empirical_transfer(const IOSystem& sys, SimulationConfig cfg,
                                                        const std::vector<double>& omegas) {
  const auto nw = static_cast<Eigen::Index>(2 * sys.channels());
  std::vector<Eigen::MatrixXcd> out(omegas.size(), Eigen::MatrixXcd::Zero(nw, nw));
  cfg.input = Impulse{};
  for (Eigen::Index c = 0; c < nw; ++c) {
    cfg.channel = static_cast<std::size_t>(c);
    const auto cols = empirical_frequency_response(simulate_io(sys, cfg), cfg, omegas);
    for (std::size_t q = 0; q < omegas.size(); ++q) out[q].col(c) = cols[q];
  }
  return out;
}

/// CSV with t, then x<m>, win<j>, wout<j> blocks of four columns (_are, _aim, _bre, _bim) per pair.
/// Rows before t = 0 carry the output tail until it decays, and an impulse is written as a spike of
/// area one in the t = 0 row, so a plain Riemann sum over all rows recovers the spectrum.
inline void write_csv(std::ostream& os, const TimeSeries& ts, std::size_t stride = 1) {
  if (stride == 0) stride = 1;
  const double h = ts.dt * static_cast<double>(stride);
  auto header = [&](const std::string& name, Eigen::Index rows) {
    for (Eigen::Index m = 0; m < rows / 2; ++m)
      for (const char* part : {"_are", "_aim", "_bre", "_bim"}) os << ',' << name << m + 1 << part;
  };
  os << 't';
  header("x", ts.x.rows());
  header("win", ts.w_in.rows());
  header("wout", ts.w_out.rows());
  os << '\n';
  auto put = [&](const Eigen::VectorXcd& v) {
    for (Eigen::Index r = 0; r + 1 < v.size(); r += 2)
      os << ',' << format_double(v(r).real()) << ',' << format_double(v(r).imag()) << ','
         << format_double(v(r + 1).real()) << ',' << format_double(v(r + 1).imag());
  };

  std::vector<Eigen::VectorXcd> tail;
  if (ts.tail_state.size() > 0 && ts.tail_state.norm() > 0) {
    const Eigen::MatrixXcd step = (ts.tail_generator * h).exp();
    const double floor = 1e-12 * (ts.tail_out * ts.tail_state).norm();
    Eigen::VectorXcd v = step * ts.tail_state;
    for (double t = h; t <= ts.t(ts.t.size() - 1) + 0.5 * h; t += h, v = step * v) {
      const Eigen::VectorXcd w = ts.tail_out * v;
      if (w.norm() <= floor) break;
      tail.push_back(w);
    }
  }
  const Eigen::VectorXcd zx = Eigen::VectorXcd::Zero(ts.x.rows()), zw = Eigen::VectorXcd::Zero(ts.w_in.rows());
  for (std::size_t m = tail.size(); m > 0; --m) {
    os << format_double(-h * static_cast<double>(m));
    put(zx);
    put(zw);
    put(tail[m - 1]);
    os << '\n';
  }
  for (Eigen::Index n = 0; n < ts.t.size(); n += static_cast<Eigen::Index>(stride)) {
    Eigen::VectorXcd w_in = ts.w_in.col(n), w_out = ts.w_out.col(n);
    if (n == 0 && ts.impulse.size() > 0) {
      w_in += ts.impulse / h;
      w_out += ts.impulse / h;
    }
    os << format_double(ts.t(n));
    put(ts.x.col(n));
    put(w_in);
    put(w_out);
    os << '\n';
  }
}

}  // namespace qnet
