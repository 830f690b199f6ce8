#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "error.hpp"
#include "netlib.hpp"
#include "tfcore.hpp"

namespace qnet {

enum class Scale { Log, Linear };

struct SweepSpec {
  double wmin = 0.1;
  double wmax = 10;
  std::size_t points = 100;
  Scale scale = Scale::Log;

  void validate() const {
    if (!std::isfinite(wmin) || !std::isfinite(wmax) || !(wmin < wmax))
      throw Error(ErrorCode::InvalidArgument, "sweep needs finite wmin < wmax");
    if (points < 2) throw Error(ErrorCode::InvalidArgument, "sweep needs at least two points");
    if (scale == Scale::Log && !(wmin > 0)) throw Error(ErrorCode::InvalidArgument, "log sweep needs wmin > 0");
  }

  std::vector<double> grid() const {
    validate();
    std::vector<double> w(points);
    const double span = static_cast<double>(points - 1);
    for (std::size_t q = 0; q < points; ++q) {
      const double f = static_cast<double>(q) / span;
      w[q] = scale == Scale::Log ? wmin * std::pow(wmax / wmin, f) : wmin + (wmax - wmin) * f;
    }
    w.back() = wmax;
    return w;
  }
};

struct UnitarityReport {
  double max_defect = 0;
  double argmax_omega = 0;
  bool pass = false;
};

inline UnitarityReport sweep_unitarity(const TransferMap& G, const SweepSpec& sweep, double tol) {
  UnitarityReport r;
  const auto grid = sweep.grid();
  r.argmax_omega = grid.front();
  for (double w : grid) {
    const double d = unitarity_defect(G, w);
    if (d > r.max_defect) {
      r.max_defect = d;
      r.argmax_omega = w;
    }
  }
  r.pass = r.max_defect <= tol;
  return r;
}

/// omega, then g_<r>_<c>_are, _aim, _bre, _bim for every entry of G(i omega) = make_dnum(alpha, beta).
inline void write_gain_csv(std::ostream& os, const TransferMap& G, const SweepSpec& sweep) {
  const auto grid = sweep.grid();
  os << "omega";
  for (std::size_t r = 1; r <= G.rows(); ++r)
    for (std::size_t c = 1; c <= G.cols(); ++c)
      for (const char* part : {"_are", "_aim", "_bre", "_bim"}) os << ",g_" << r << '_' << c << part;
  os << '\n';
  for (double w : grid) {
    const Eigen::MatrixXcd d = G.eval_doubled(cplx(0, w));
    os << format_double(w);
    for (Eigen::Index r = 0; r < d.rows(); r += 2)
      for (Eigen::Index c = 0; c < d.cols(); c += 2)
        os << ',' << format_double(d(r, c).real()) << ',' << format_double(d(r, c).imag()) << ','
           << format_double(d(r, c + 1).real()) << ',' << format_double(d(r, c + 1).imag());
    os << '\n';
  }
}

}  // namespace qnet
