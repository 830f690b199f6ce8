#include <gtest/gtest.h>

#include <sstream>

#include <qnet/timedomain.hpp>

#include "test_util.hpp"

using namespace qnet;
using namespace qnet::testing;

namespace {

IOSystem cavity(double w0, double kappa, double gamma) {
  return IOSystem(Generator(DMatrix{{DNum::i() * w0}}), DMatrix::identity(1), MemoryKernel::lorentzian(kappa, gamma));
}

/// Worst relative column error of the empirical response against the analytic G.
double sup_relative_error(const IOSystem& sys, const SimulationConfig& cfg, const std::vector<double>& omegas) {
  const auto G = io_transfer_multi(sys);
  const auto emp = empirical_frequency_response(simulate_io(sys, cfg), cfg, omegas);
  double worst = 0;
  for (std::size_t q = 0; q < omegas.size(); ++q) {
    const Eigen::VectorXcd ref = G.eval_doubled(cplx(0, omegas[q])).col(static_cast<Eigen::Index>(cfg.channel));
    worst = std::max(worst, (emp[q] - ref).norm() / ref.norm());
  }
  return worst;
}

}  // namespace

TEST(Simulate, DecoupledFollowsMatrixExponential) {
  const DMatrix P = random_passive_skew(2);
  const IOSystem sys(Generator(P), DMatrix(2, 1), MemoryKernel::lorentzian(1, 1));
  SimulationConfig cfg;
  cfg.T = 12;
  cfg.input = Sinusoid{0.4};
  Eigen::VectorXcd x0(4);
  x0 << cplx(0.3, -0.2), cplx(0.3, 0.2), cplx(-1, 0.5), cplx(-1, -0.5);
  cfg.x0 = x0;
  const auto ts = simulate_io(sys, cfg);
  const Eigen::MatrixXcd Pd = to_doubled(P);
  double worst = 0;
  for (Eigen::Index n = 0; n < ts.t.size(); n += 997)
    worst = std::max(worst, (ts.x.col(n) - (Pd * ts.t(n)).exp() * x0).norm());
  EXPECT_LT(worst, 1e-8);
  EXPECT_LT((ts.w_out - ts.w_in).norm(), 1e-15);
}

TEST(Simulate, ExpModeMatchesJointClosedSystem) {
  const DMatrix P = random_passive_skew(1), Q = random_passive_skew(2);
  const DMatrix D = random_dmatrix(1, 1), E = random_dmatrix(2, 1) * 0.5;
  const IOSystem sys(Generator(P), D, MemoryKernel::exp_mode(E, Generator(Q)));
  SimulationConfig cfg;
  cfg.T = 6;
  cfg.input = Sinusoid{1.0};
  cfg.amplitude = 0;
  Eigen::VectorXcd x0(2);
  x0 << cplx(1, 0.5), cplx(1, -0.5);
  cfg.x0 = x0;
  const auto ts = simulate_io(sys, cfg);
  DMatrix A(3, 3);
  A.set_block(0, 0, P);
  A.set_block(0, 1, -(D * E.flat()));
  A.set_block(1, 0, E * D.flat());
  A.set_block(1, 1, Q);
  ASSERT_TRUE(is_skew_flat_hermitian(A));
  Eigen::VectorXcd y0 = Eigen::VectorXcd::Zero(6);
  y0.head(2) = x0;
  const Eigen::VectorXcd yT = to_doubled(expm(A * cfg.T)) * y0;
  EXPECT_LT((ts.x.col(ts.t.size() - 1) - yT.head(2)).norm(), 1e-8);
}

TEST(Simulate, CavityImpulseSpectrum) {
  const IOSystem sys = cavity(0, 1, 2);
  SimulationConfig cfg;
  cfg.T = 40;
  EXPECT_LT(sup_relative_error(sys, cfg, log_grid(0.2, 10, 40)), 1e-3);
  cfg.channel = 1;
  EXPECT_LT(sup_relative_error(sys, cfg, log_grid(0.2, 10, 40)), 1e-3);
}

TEST(Simulate, ConvergenceOrder) {
  const IOSystem sys = cavity(0.3, 1, 2);
  SimulationConfig coarse;
  coarse.T = 40;
  coarse.dt = 4e-3;
  SimulationConfig fine = coarse;
  fine.dt = 2e-3;
  const auto grid = log_grid(0.2, 10, 30);
  const double ec = sup_relative_error(sys, coarse, grid), ef = sup_relative_error(sys, fine, grid);
  EXPECT_GE(ec / ef, 3.0) << ec << " " << ef;
}

TEST(Simulate, SinusoidSteadyState) {
  const IOSystem sys = cavity(0, 1, 2);
  SimulationConfig cfg;
  cfg.T = 60;
  cfg.input = Sinusoid{1.3};
  const Eigen::VectorXcd r = steady_state_ratio(simulate_io(sys, cfg), cfg);
  const Eigen::VectorXcd ref = io_transfer(sys).eval_doubled(cplx(0, 1.3)).col(0);
  EXPECT_LT((r - ref).norm() / ref.norm(), 1e-3);
  EXPECT_THROW(empirical_frequency_response(simulate_io(sys, cfg), cfg, {1.3}), Error);
}

TEST(Simulate, ChirpSpectrum) {
  const IOSystem sys = cavity(0, 1, 2);
  SimulationConfig cfg;
  cfg.T = 200;
  cfg.input = Chirp{0.1, 5};
  EXPECT_LT(sup_relative_error(sys, cfg, linear_grid(0.5, 4, 15)), 1e-3);
}

TEST(Empirical, StaticIdentityIsFlat) {
  const IOSystem sys(Generator(DMatrix{{DNum::i()}}), DMatrix(1, 1), MemoryKernel::lorentzian(1, 1));
  SimulationConfig cfg;
  cfg.T = 20;
  for (const auto& r : empirical_frequency_response(simulate_io(sys, cfg), cfg, linear_grid(-5, 5, 21))) {
    EXPECT_LT(std::abs(r(0) - 1.0), 1e-6);
    EXPECT_LT(std::abs(r(1)), 1e-6);
  }
  cfg.input = Chirp{0.5, 3};
  for (const auto& r : empirical_frequency_response(simulate_io(sys, cfg), cfg, linear_grid(1, 2.5, 7)))
    EXPECT_LT(std::abs(r(0) - 1.0), 1e-6);
}

TEST(Empirical, MarkovianCavityLimit) {
  const double kappa = 1;
  const IOSystem sys = cavity(0, kappa, 1e3 * kappa);
  SimulationConfig cfg;
  cfg.T = 40;
  cfg.dt = 2e-4;
  const auto grid = linear_grid(-5, 5, 21);
  const auto emp = empirical_frequency_response(simulate_io(sys, cfg), cfg, grid);
  for (std::size_t q = 0; q < grid.size(); ++q) {
    const cplx s(0, grid[q]);
    EXPECT_LT(std::abs(emp[q](0) - (s - kappa / 2) / (s + kappa / 2)), 2e-2);
  }
}

TEST(Empirical, Linearity) {
  const IOSystem sys = cavity(0.2, 1, 2);
  SimulationConfig a;
  a.T = 30;
  a.dt = 2e-3;
  SimulationConfig b = a;
  b.amplitude = 3.7;
  const auto grid = linear_grid(-4, 4, 9);
  const auto ra = empirical_frequency_response(simulate_io(sys, a), a, grid);
  const auto rb = empirical_frequency_response(simulate_io(sys, b), b, grid);
  for (std::size_t q = 0; q < grid.size(); ++q) EXPECT_LT((ra[q] - rb[q]).norm(), 1e-12);
}

TEST(Empirical, PassiveCavityIsAllPass) {
  const IOSystem sys = cavity(0.5, 1.2, 3);
  SimulationConfig cfg;
  cfg.T = 40;
  const auto grid = linear_grid(-8, 8, 33);
  const auto G = empirical_transfer(sys, cfg, grid);
  for (const auto& g : G) {
    const auto m = from_doubled(g);
    EXPECT_LT(std::abs(std::abs(m(0, 0).alpha()) - 1.0), 2e-3);
  }
}

TEST(Errors, Diagnostics) {
  const IOSystem markov(Generator(DMatrix{{DNum::i()}}), DMatrix::identity(1), MemoryKernel::markov(DMatrix::identity(1)));
  try {
    simulate_io(markov, SimulationConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unsupported);
  }

  const IOSystem gain(Generator(DMatrix{{DNum::k() * 5.0}}), DMatrix::identity(1), MemoryKernel::lorentzian(1, 2));
  SimulationConfig cfg;
  cfg.T = 100;
  cfg.dt = 1e-2;
  try {
    simulate_io(gain, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnstableSimulation);
  }

  const IOSystem closed(Generator(DMatrix{{DNum::i()}}), DMatrix::identity(1),
                        MemoryKernel::exp_mode(DMatrix::identity(1), Generator(DMatrix{{DNum::i() * 2.0}})));
  cfg.T = 30;
  try {
    empirical_frequency_response(simulate_io(closed, cfg), cfg, {1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientDecay);
  }

  SimulationConfig bad;
  bad.dt = -1;
  EXPECT_THROW(simulate_io(cavity(0, 1, 2), bad), Error);
  bad = SimulationConfig{};
  bad.T = 5;
  EXPECT_THROW(simulate_io(cavity(0, 1, 2), bad), Error);
  bad = SimulationConfig{};
  bad.channel = 2;
  EXPECT_THROW(simulate_io(cavity(0, 1, 2), bad), Error);
}

TEST(Csv, LayoutAndDeterminism) {
  SimulationConfig cfg;
  cfg.T = 12;
  cfg.dt = 1e-2;
  std::ostringstream a, b;
  write_csv(a, simulate_io(cavity(0, 1, 2), cfg), 10);
  write_csv(b, simulate_io(cavity(0, 1, 2), cfg), 10);
  EXPECT_EQ(a.str(), b.str());
  std::istringstream in(a.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header,
            "t,x1_are,x1_aim,x1_bre,x1_bim,win1_are,win1_aim,win1_bre,win1_bim,wout1_are,wout1_aim,wout1_bre,wout1_bim");
  std::size_t rows = 0, negative = 0;
  for (std::string line; std::getline(in, line);) {
    ++rows;
    if (line[0] == '-') ++negative;
  }
  EXPECT_EQ(rows - negative, 121u);
  EXPECT_GT(negative, 0u);
}

TEST(Csv, RiemannSumRecoversSpectrum) {
  const IOSystem sys = cavity(0.4, 1, 2);
  SimulationConfig cfg;
  cfg.T = 30;
  cfg.dt = 1e-3;
  std::ostringstream os;
  write_csv(os, simulate_io(sys, cfg), 2);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  std::vector<double> t;
  std::vector<cplx> alpha;
  while (std::getline(in, line)) {
    std::vector<double> v;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) v.push_back(std::stod(cell));
    t.push_back(v[0]);
    alpha.push_back(cplx(v[9], v[10]));
  }
  const auto G = io_transfer(sys);
  for (double w : {0.3, 1.0, 2.5}) {
    cplx acc = 0;
    for (std::size_t n = 0; n < t.size(); ++n) acc += alpha[n] * std::exp(cplx(0, -w * t[n]));
    acc *= 2e-3;
    EXPECT_LT(std::abs(acc - G.eval_doubled(cplx(0, w))(0, 0)), 1e-4) << w;
  }
}
