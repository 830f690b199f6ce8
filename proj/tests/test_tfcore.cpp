#include <gtest/gtest.h>

#include <numbers>

#include <qnet/tfcore.hpp>

#include "test_util.hpp"

using namespace qnet;
using namespace qnet::testing;

namespace {

// 2x2-block complex matrix for the complexified value; the natural form to compare against scalar oracles.
Eigen::MatrixXcd dbl(const CDMatrix& m) { return to_doubled(m); }

double diff(const CDMatrix& a, const CDMatrix& b) { return (dbl(a) - dbl(b)).norm(); }

Eigen::MatrixXcd diag2(cplx x, cplx y) {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2, 2);
  m(0, 0) = x;
  m(1, 1) = y;
  return m;
}

Generator random_bath(std::size_t m) { return Generator(random_passive_skew(m)); }

}  // namespace

TEST(TransferMap, ConstantAndIdentity) {
  const auto I = TransferMap::identity(3);
  EXPECT_LT(diff(I(cplx(0.3, 2)), complexify(DMatrix::identity(3))), 1e-15);
  EXPECT_LT(diff(I.tilde()(cplx(1, -1)), complexify(DMatrix::identity(3))), 1e-15);
}

TEST(TransferMap, ResolventScalar) {
  const Generator P(DMatrix{{DNum::i()}});
  const auto M = system_M(P, DMatrix::identity(1));
  const CDMatrix v = M(2.0);
  // 1/(2 - i) = 0.4 + 0.2i
  EXPECT_NEAR(std::abs(v(0, 0).a() - 0.4), 0, 1e-15);
  EXPECT_NEAR(std::abs(v(0, 0).b() - 0.2), 0, 1e-15);
  EXPECT_NEAR(std::abs(v(0, 0).c()), 0, 1e-15);
  EXPECT_NEAR(std::abs(v(0, 0).d()), 0, 1e-15);

  const cplx s(0.3, 1.7);
  const double w0 = 1.25;
  const auto M2 = system_M(Generator(DMatrix{{DNum::i() * w0}}), DMatrix::identity(1));
  EXPECT_LT((dbl(M2(s)) - diag2(1.0 / (s - cplx(0, w0)), 1.0 / (s + cplx(0, w0)))).norm(), 1e-14);
}

TEST(TransferMap, ResolventPoleIsSingular) {
  const auto M = system_M(Generator(DMatrix{{DNum::i()}}), DMatrix::identity(1));
  try {
    M(cplx(0, 1));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::SingularAt);
    ASSERT_TRUE(err.s().has_value());
    EXPECT_EQ(*err.s(), cplx(0, 1));
  }
}

TEST(TransferMap, SystemMShapes) {
  const Generator P(DMatrix{{DNum::i() * 0.7}});
  EXPECT_LT(dbl(system_M(P, DMatrix(1, 1))(cplx(0.2, 1))).norm(), 1e-15);

  const DMatrix D{{DNum::e(), DNum::e()}};
  const auto M = system_M(P, D);
  ASSERT_EQ(M.rows(), 2u);
  const cplx s(0.4, -0.9);
  const CDMatrix v = M(s);
  const Eigen::MatrixXcd ref = diag2(1.0 / (s - cplx(0, 0.7)), 1.0 / (s + cplx(0, 0.7)));
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) EXPECT_LT((v(r, c).matrix() - ref).norm(), 1e-14);
}

TEST(TransferMap, Delay) {
  const auto d = TransferMap::delay(0.5, 2);
  const CDMatrix v = d(cplx(0, std::numbers::pi));
  // exp(-i pi / 2) = -i as a complex scalar on both diagonal entries
  const CDMatrix ref = CDMatrix::diagonal({cscalar({0, -1}), cscalar({0, -1})});
  EXPECT_LT(diff(v, ref), 1e-15);
  EXPECT_EQ(diff(TransferMap::delay(0.0, 2)(cplx(3, 4)), complexify(DMatrix::identity(2))), 0);
  EXPECT_THROW(TransferMap::delay(-1.0, 1), Error);
}

TEST(TransferMap, EvaluationIsHomomorphic) {
  for (int n = 0; n < 30; ++n) {
    const Generator P(random_skew(2));
    const DMatrix D = random_dmatrix(2, 2);
    const auto A = system_M(P, D);
    const auto B = TransferMap::constant(random_dmatrix(2, 2)) + TransferMap::delay(0.3, 2);
    const cplx s = random_s();
    const CDMatrix a = A(s), b = B(s);
    EXPECT_LT(diff((A + B)(s), a + b), 1e-12);
    EXPECT_LT(diff((A - B)(s), a - b), 1e-12);
    EXPECT_LT(diff((A * B)(s), a * b), 1e-12);
    const auto Binv = B.inverse();
    EXPECT_LT(diff(Binv(s) * b, complexify(DMatrix::identity(2))), 1e-10);
  }
}

TEST(TransferMap, ShapeChecks) {
  EXPECT_THROW(TransferMap::identity(2) + TransferMap::identity(3), Error);
  EXPECT_THROW(TransferMap::identity(2) * TransferMap::identity(3), Error);
  EXPECT_THROW(TransferMap::zero(2, 3).inverse(), Error);
}

TEST(TransferMap, BlockAssembly) {
  const auto a = TransferMap::identity(1), b = TransferMap::delay(1.0, 1);
  const auto g = TransferMap::block({{a, b}, {b, a}});
  const cplx s(0.5, 0.5);
  const CDMatrix v = g(s);
  EXPECT_LT((v(0, 1).matrix() - std::exp(-s) * Eigen::Matrix2cd::Identity()).norm(), 1e-15);
  EXPECT_LT((v(1, 1).matrix() - Eigen::Matrix2cd::Identity()).norm(), 1e-15);
}

TEST(TransferMap, TildeSymmetryOfM) {
  for (int n = 0; n < 20; ++n) {
    const Generator P(random_skew(3));
    const auto M = system_M(P, random_dmatrix(3, 2));
    const auto Mt = M.tilde();
    for (int q = 0; q < 20; ++q) {
      const cplx s = random_s();
      EXPECT_LT(diff(Mt(s), -M(s)), 1e-10);
    }
  }
}

TEST(Kernel, LorentzianValues) {
  const auto K = MemoryKernel::lorentzian(1, 2);
  EXPECT_EQ(K.at(0), DMatrix::identity(1));
  EXPECT_NEAR(K.at(0.5)(0, 0).a(), std::exp(-1.0), 1e-15);
  const CDMatrix np = kernel_Npm(K, Side::Plus)(1.0);
  EXPECT_NEAR(std::abs(np(0, 0).a() - 1.0 / 3.0), 0, 1e-15);
  EXPECT_NEAR(std::abs(np(0, 0).b()), 0, 1e-15);
  EXPECT_THROW(MemoryKernel::lorentzian(0, 1), Error);
  EXPECT_THROW(MemoryKernel::lorentzian(1, -1), Error);
}

TEST(Kernel, MarkovDelta) {
  const auto K = MemoryKernel::markov(DMatrix::identity(2));
  const auto half = complexify(DMatrix::identity(2) * 0.5);
  EXPECT_LT(diff(K.half(Side::Plus, cplx(0.1, 3)), half), 1e-16);
  EXPECT_LT(diff(K.half(Side::Minus, cplx(-2, 1)), half), 1e-16);
  try {
    K.at(0.1);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::Unsupported);
  }
  EXPECT_THROW(MemoryKernel::markov(DMatrix{{DNum::i()}}), Error);
}

TEST(Kernel, ExpModeMatchesQuadrature) {
  const Generator Q(DMatrix::diagonal({DNum::i() * 0.8, DNum::i() * -1.5}));
  const DMatrix E{{make_dnum({0.6, 0.2}, {0.1, 0})}, {make_dnum({-0.3, 0}, {0, 0.25})}};
  const auto K = MemoryKernel::exp_mode(E, Q);
  // Composite Simpson on the time-domain kernel.
  auto integrate = [&](cplx s, double lo, double hi) {
    const int n = 16000;
    const double h = (hi - lo) / n;
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(2, 2);
    for (int q = 0; q <= n; ++q) {
      const double t = lo + q * h;
      const double w = (q == 0 || q == n) ? 1 : (q % 2 ? 4 : 2);
      acc += w * std::exp(-s * t) * to_doubled(K.at(t));
    }
    return Eigen::MatrixXcd(acc * (h / 3));
  };
  for (cplx s : {cplx(1.0, 0.5), cplx(0.8, -2.0)}) {
    EXPECT_LT((K.half_doubled(Side::Plus, s) - integrate(s, 0, 40)).norm(), 1e-8);
    EXPECT_LT((K.half_doubled(Side::Minus, -s) - integrate(-s, -40, 0)).norm(), 1e-8);
  }
}

TEST(Kernel, EvenInTime) {
  const auto L = MemoryKernel::lorentzian(0.7, 1.9, 2);
  const auto X = MemoryKernel::exp_mode(random_dmatrix(3, 2), random_bath(3));
  for (double t = -5; t <= 5; t += 0.37) {
    EXPECT_LT(max_abs_diff(L.at(t).flat(), L.at(-t)), 1e-14);
    EXPECT_LT(max_abs_diff(X.at(t).flat(), X.at(-t)), 1e-10);
  }
}

TEST(Kernel, ColoredNoiseIdentity) {
  for (int n = 0; n < 20; ++n) {
    const Generator Q = random_bath(3);
    const DMatrix E = random_dmatrix(3, 2);
    const auto K = MemoryKernel::exp_mode(E, Q);
    const double t = uniform(-3, 3), tp = uniform(-3, 3);
    const DMatrix lhs = E.flat() * expm(Q.matrix() * t) * expm(Q.matrix() * -tp) * E;
    EXPECT_LT(max_abs_diff(lhs, K.at(t - tp)), 1e-10);
  }
}

TEST(Kernel, TildeSwapsHalves) {
  std::vector<MemoryKernel> kernels{MemoryKernel::lorentzian(1.3, 0.4, 2), MemoryKernel::markov(DMatrix::identity(1)),
                                    MemoryKernel::exp_mode(random_dmatrix(2, 2), random_bath(2))};
  for (const auto& K : kernels) {
    const auto Np = kernel_Npm(K, Side::Plus), Nm = kernel_Npm(K, Side::Minus);
    for (int q = 0; q < 20; ++q) {
      const cplx s = random_s();
      EXPECT_LT(diff(Np.tilde()(s), Nm(s)), 1e-10);
      EXPECT_LT(diff(Nm.tilde()(s), Np(s)), 1e-10);
    }
  }
}

TEST(Hamiltonian, Examples) {
  const double w0 = 0.9;
  const Generator P1 = generator_from_hamiltonian({w0});
  EXPECT_EQ(P1.matrix(), (DMatrix{{DNum::i() * w0}}));

  Eigen::MatrixXcd alpha = Eigen::MatrixXcd::Zero(1, 1), beta(1, 1);
  beta(0, 0) = cplx(0, 0.35);
  const Generator P2 = generator_from_hamiltonian(1, {0.0}, alpha, beta);
  EXPECT_EQ(P2.matrix(), (DMatrix{{DNum::k() * 0.35}}));

  const Generator P3 = generator_from_hamiltonian({1.0, -2.0, 0.5});
  EXPECT_EQ(P3.matrix(), DMatrix::diagonal({DNum::i(), DNum::i() * -2.0, DNum::i() * 0.5}));
}

TEST(Hamiltonian, RandomCouplingsAreSkew) {
  for (int n = 0; n < 50; ++n) {
    const std::size_t m = 3;
    Eigen::MatrixXcd alpha = Eigen::MatrixXcd::Random(3, 3), beta = Eigen::MatrixXcd::Random(3, 3);
    for (int j = 0; j < 3; ++j) alpha(j, j) = cplx(0, alpha(j, j).imag());
    const Generator P = generator_from_hamiltonian(m, {uniform(), uniform(), uniform()}, alpha, beta);
    EXPECT_TRUE(is_skew_flat_hermitian(P.matrix()));
  }
  EXPECT_THROW(generator_from_hamiltonian(2, {1.0}, Eigen::MatrixXcd::Zero(2, 2), Eigen::MatrixXcd::Zero(2, 2)),
               Error);
}
