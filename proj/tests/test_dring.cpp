#include <gtest/gtest.h>

#include <qnet/dring.hpp>

#include "test_util.hpp"

using namespace qnet;
using qnet::testing::random_dnum;

namespace {

constexpr double kTol = 1e-12;

void expect_near(const DNum& p, const DNum& q, double tol = kTol) {
  EXPECT_TRUE(approx_equal(p, q, tol)) << to_literal(p) << " vs " << to_literal(q);
}

// Product through the explicit 2x2 complex matrix form.
DNum matrix_product(const DNum& p, const DNum& q) { return DNum::from_matrix(p.matrix() * q.matrix()); }

const DNum e = DNum::e(), i = DNum::i(), j = DNum::j(), k = DNum::k();

}  // namespace

TEST(DRing, BasisTable) {
  EXPECT_EQ(-(i * i), e);
  EXPECT_EQ(j * j, e);
  EXPECT_EQ(k * k, e);
  EXPECT_EQ(i * j * k, e);
  EXPECT_EQ(i * j, -(j * i));
  EXPECT_EQ(j * k, -(k * j));
  EXPECT_EQ(k * i, -(i * k));
  EXPECT_EQ(i * j, k);
}

TEST(DRing, ProductAgreesWithMatrixForm) {
  for (int n = 0; n < 1000; ++n) {
    const DNum p = random_dnum(), q = random_dnum();
    expect_near(p * q, matrix_product(p, q));
  }
}

TEST(DRing, MatrixFormRoundTrip) {
  for (int n = 0; n < 100; ++n) {
    const DNum p = random_dnum();
    expect_near(DNum::from_matrix(p.matrix()), p, 0);
  }
  const DNum p = make_dnum({1, 2}, {3, -4});
  EXPECT_EQ(p.alpha(), cplx(1, 2));
  EXPECT_EQ(p.beta(), cplx(3, -4));
  EXPECT_EQ(p.matrix()(1, 0), std::conj(p.beta()));
  EXPECT_EQ(p.matrix()(1, 1), std::conj(p.alpha()));
}

TEST(DRing, RingAxiomsOnRandomTriples) {
  for (int n = 0; n < 1000; ++n) {
    const DNum p = random_dnum(), q = random_dnum(), r = random_dnum();
    expect_near((p * q) * r, p * (q * r), 1e-13);
    expect_near(p * (q + r), p * q + p * r, 1e-13);
    expect_near((p + q) * r, p * r + q * r, 1e-13);
    expect_near((p * q).flat(), q.flat() * p.flat(), 1e-13);
  }
}

TEST(DRing, FlatExamples) {
  EXPECT_EQ(e.flat(), e);
  EXPECT_EQ(DNum(1, 2, 3, 4).flat(), DNum(1, -2, -3, -4));
  EXPECT_EQ(i.flat(), -i);
}

TEST(DRing, FlatIsInvolutionAndMatchesDefinition) {
  // p-flat = i^-1 p^dagger i on the matrix form.
  const Eigen::Matrix2cd im = i.matrix();
  for (int n = 0; n < 1000; ++n) {
    const DNum p = random_dnum();
    expect_near(p.flat().flat(), p, 0);
    expect_near(p.flat(), DNum::from_matrix(im.inverse() * p.matrix().adjoint() * im));
  }
}

TEST(DRing, Inverse) {
  expect_near(make_dnum(2, 0).inverse(), make_dnum(0.5, 0));
  expect_near(j.inverse(), j);
  EXPECT_THROW(make_dnum(1, 1).inverse(), Error);
  try {
    make_dnum(1, 1).inverse();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::NonInvertible);
  }
  for (int n = 0; n < 1000; ++n) {
    const DNum p = random_dnum();
    if (!p.is_invertible(1e-3)) continue;
    const DNum q = p.inverse();
    expect_near(p * q, e, 1e-9);
    expect_near(q * p, e, 1e-9);
    expect_near(q, DNum::from_matrix(p.matrix().inverse()), 1e-9);
  }
}

TEST(DRing, DeterminantIsMatrixDeterminant) {
  for (int n = 0; n < 100; ++n) {
    const DNum p = random_dnum();
    EXPECT_NEAR(p.det(), p.matrix().determinant().real(), 1e-13);
    EXPECT_NEAR(0.0, p.matrix().determinant().imag(), 1e-13);
  }
}

TEST(DRing, ClassifyExamples) {
  const auto ci = classify(i);
  EXPECT_EQ(ci.a, 0);
  EXPECT_EQ(ci.C, -1);
  EXPECT_FALSE(labels(ci).squeezed);
  EXPECT_FALSE(labels(ci).gain);
  EXPECT_FALSE(labels(ci).lossy);

  const auto ck = classify(k);
  EXPECT_EQ(ck.a, 0);
  EXPECT_EQ(ck.C, 1);
  EXPECT_TRUE(labels(ck).squeezed);

  const auto cl = classify(make_dnum({-0.5, 2}, 0));
  EXPECT_DOUBLE_EQ(cl.a, -0.5);
  EXPECT_DOUBLE_EQ(cl.C, -4);
  EXPECT_TRUE(labels(cl).lossy);
  EXPECT_FALSE(labels(cl).squeezed);
}

TEST(DRing, ClassifyInvariantUnderUnimodularConjugation) {
  for (int n = 0; n < 1000; ++n) {
    DNum u = random_dnum();
    if (std::abs(u.det()) < 0.05) continue;
    u = u / std::sqrt(std::abs(u.det()));
    if (u.det() < 0) u = u * j;  // make det = +1
    ASSERT_NEAR(u.det(), 1.0, 1e-12);
    expect_near(u.flat() * u, e, 1e-10);
    const DNum p = random_dnum();
    const auto before = classify(p), after = classify(u.flat() * p * u);
    EXPECT_NEAR(before.a, after.a, 1e-10 * std::max(1.0, u.norm2() * u.norm2()));
    EXPECT_NEAR(before.C, after.C, 1e-10 * std::max(1.0, u.norm2() * u.norm2()));
  }
}

TEST(DRing, EigenvaluesAreAPlusMinusSqrtC) {
  for (int n = 0; n < 1000; ++n) {
    const DNum p = random_dnum();
    const auto m = classify(p);
    const cplx r = std::sqrt(cplx(m.C));
    Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(p.matrix());
    cplx l0 = es.eigenvalues()(0), l1 = es.eigenvalues()(1);
    const cplx x0 = m.a + r, x1 = m.a - r;
    const double direct = std::abs(l0 - x0) + std::abs(l1 - x1);
    const double swapped = std::abs(l0 - x1) + std::abs(l1 - x0);
    EXPECT_LT(std::min(direct, swapped), 1e-10);
  }
}

TEST(DRing, Literal) {
  EXPECT_EQ(to_literal(DNum(1, -2, 0.5, 0)), "d(1,-2,0.5,0)");
}

TEST(DRing, ComplexifiedScalarsCommute) {
  const CDNum z = cscalar({0.3, -1.2});
  for (int n = 0; n < 100; ++n) {
    const CDNum p = complexify(random_dnum());
    EXPECT_TRUE(approx_equal(z * p, p * z, 1e-14));
  }
}
