#pragma once

#include <random>

#include <qnet/dmatrix.hpp>

namespace qnet::testing {

inline std::mt19937_64& rng() {
  static std::mt19937_64 g(20240917);
  return g;
}

inline double uniform(double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng());
}

inline DNum random_dnum() { return {uniform(), uniform(), uniform(), uniform()}; }

inline DMatrix random_dmatrix(std::size_t r, std::size_t c) {
  DMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = random_dnum();
  return m;
}

/// (A - A-flat)/2 is skew flat-Hermitian for any A.
inline DMatrix random_skew(std::size_t n) {
  const DMatrix a = random_dmatrix(n, n);
  return (a - a.flat()) * 0.5;
}

/// Purely oscillatory generator: diag(w_j i) plus beam-splitter type couplings.
inline DMatrix random_passive_skew(std::size_t n) {
  DMatrix p(n, n);
  for (std::size_t j = 0; j < n; ++j) p(j, j) = DNum(0, uniform(-2, 2), 0, 0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = j + 1; k < n; ++k) {
      const DNum x = make_dnum({uniform(), uniform()}, 0);
      p(j, k) = x;
      p(k, j) = -x.flat();
    }
  return p;
}

inline cplx random_s(double re_lo = 0.05, double re_hi = 1.0, double im = 10.0) {
  return {uniform(re_lo, re_hi), uniform(-im, im)};
}

}  // namespace qnet::testing

#include <qnet/netlib.hpp>

namespace qnet::testing {

inline MemoryKernel random_kernel(std::size_t k) {
  const double pick = uniform(0, 3);
  if (pick < 1) return MemoryKernel::lorentzian(uniform(0.2, 2), uniform(0.5, 4), k);
  if (pick < 2) {
    const DMatrix a = random_dmatrix(k, k);
    return MemoryKernel::markov(a * a.flat());
  }
  const std::size_t m = k + 1;
  return MemoryKernel::exp_mode(random_dmatrix(m, k) * 0.5, Generator(random_passive_skew(m)));
}

/// Splitter whose total matrix is a random 2x2 unitary with entries of the form make_dnum(u, 0).
inline BeamSplitter random_passive_splitter() {
  Eigen::Matrix2cd a;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) a(r, c) = cplx(uniform(), uniform());
  const Eigen::Matrix2cd u = Eigen::HouseholderQR<Eigen::Matrix2cd>(a).householderQ();
  auto d = [&](int r, int c) { return DMatrix{{make_dnum(u(r, c), 0)}}; };
  return beam_splitter(d(0, 0), d(0, 1), d(1, 0), d(1, 1));
}

inline std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> w(n);
  for (int q = 0; q < n; ++q) w[q] = lo * std::pow(hi / lo, q / double(n - 1));
  return w;
}

inline std::vector<double> linear_grid(double lo, double hi, int n) {
  std::vector<double> w(n);
  for (int q = 0; q < n; ++q) w[q] = lo + (hi - lo) * q / double(n - 1);
  return w;
}

}  // namespace qnet::testing
