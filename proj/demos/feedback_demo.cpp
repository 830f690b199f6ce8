// Phase response of a Lorentzian cavity before and after closing a delayed feedback loop around it.
#include <cmath>
#include <cstdio>

#include <qnet/netlib.hpp>

using namespace qnet;

int main() {
  const IOSystem cav(Generator(DMatrix{{DNum()}}), DMatrix::identity(1), MemoryKernel::lorentzian(1, 2));
  const double h = 1 / std::sqrt(2.0);
  const auto bs = beam_splitter(DMatrix{{DNum::e() * h}}, DMatrix{{DNum::e() * h}}, DMatrix{{DNum::e() * -h}},
                                DMatrix{{DNum::e() * h}});
  const double tau = 0.3;

  const auto open = io_transfer(cav);
  const auto net = indirect_feedback_network(cav, bs, tau);
  const auto closed = gain_riegle(net, "b1", "c1");

  std::printf("%10s %12s %12s %12s %12s\n", "omega", "|G_open|", "arg G_open", "|G_closed|", "arg G_closed");
  for (int q = 0; q <= 16; ++q) {
    const double w = 0.01 * std::pow(1e4, q / 16.0);
    const cplx a = open(cplx(0, w))(0, 0).alpha();
    const cplx c = closed(cplx(0, w))(0, 0).alpha();
    std::printf("%10.4f %12.9f %12.6f %12.9f %12.6f\n", w, std::abs(a), std::arg(a), std::abs(c), std::arg(c));
  }

  double worst = 0;
  for (int q = 0; q <= 200; ++q) worst = std::max(worst, unitarity_defect(closed, -20 + 0.2 * q));
  std::printf("closed loop flat-unitarity defect on [-20, 20]: %.3e\n", worst);
}
