#pragma once

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmatrix.hpp"
#include "netdsl.hpp"
#include "sweep.hpp"
#include "timedomain.hpp"

namespace qnet::cli {

enum ExitCode : int { Ok = 0, CheckFailed = 1, InputError = 2, NumericError = 3, BadFlags = 4 };

/// Thrown for flag values that parse but make no sense for the input.
struct FlagError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string input, output, from, to, system;
  SweepSpec sweep;
  std::string scale = "log";
  double tol = 1e-9;
  double dt = 1e-3;
  double T = 200;
  std::size_t samples = 100;
  std::uint64_t seed = 1;
  std::string signal = "impulse";
  double omega = 1;
  std::size_t channel = 0;
  std::size_t stride = 1;
};

namespace detail {

inline NetworkSpec load(const Options& o) {
  std::ifstream in(o.input);
  if (!in) throw ParseError(ParseErrorCode::SyntaxError, Span{}, "cannot read '" + o.input + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_network(ss.str());
}

inline SweepSpec sweep_of(const Options& o) {
  SweepSpec s = o.sweep;
  if (o.scale == "log") s.scale = Scale::Log;
  else if (o.scale == "linear") s.scale = Scale::Linear;
  else throw FlagError("--scale must be log or linear");
  try {
    s.validate();
  } catch (const Error& e) {
    throw FlagError(e.what());
  }
  return s;
}

/// --from/--to, falling back to the first query of the file.
inline std::pair<std::string, std::string> endpoints(const Options& o, const BuiltNetwork& net) {
  std::string from = o.from, to = o.to;
  if (from.empty() || to.empty()) {
    if (net.queries.empty()) throw FlagError("no --from/--to given and the netlist has no query");
    if (from.empty()) from = net.queries.front().from;
    if (to.empty()) to = net.queries.front().to;
  }
  for (const auto& n : {from, to})
    if (!net.graph.has_node(n)) throw FlagError("unknown node '" + n + "'");
  return {from, to};
}

inline std::string system_of(const Options& o, const NetworkSpec& spec, bool need_coupling) {
  if (!o.system.empty()) {
    for (const auto& s : spec.systems)
      if (s.id == o.system) return o.system;
    throw FlagError("unknown system '" + o.system + "'");
  }
  for (const auto& s : spec.systems) {
    if (!need_coupling) return s.id;
    for (const auto& c : spec.couplings)
      if (c.system == s.id) return s.id;
  }
  throw FlagError(need_coupling ? "netlist has no coupled system" : "netlist has no system");
}

inline void emit(const Options& o, const std::string& text, std::ostream& out) {
  if (o.output.empty() || o.output == "-") {
    out << text;
    return;
  }
  std::ofstream f(o.output, std::ios::binary);
  if (!f) throw FlagError("cannot write '" + o.output + "'");
  f << text;
}

inline std::string labels_text(const ModeLabels& l) {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += ',';
    s += name;
  };
  add(l.gain, "gain");
  add(l.lossy, "lossy");
  add(l.squeezed, "squeezed");
  return s.empty() ? "-" : s;
}

inline int cmd_gain(const Options& o, std::ostream& out) {
  const auto sweep = sweep_of(o);
  const auto net = build_graph(load(o));
  const auto [from, to] = endpoints(o, net);
  std::ostringstream csv;
  write_gain_csv(csv, gain_riegle(net.graph, from, to), sweep);
  emit(o, csv.str(), out);
  return Ok;
}

inline int cmd_check_unitarity(const Options& o, std::ostream& out) {
  const auto sweep = sweep_of(o);
  const auto net = build_graph(load(o));
  const auto [from, to] = endpoints(o, net);
  const auto r = sweep_unitarity(gain_riegle(net.graph, from, to), sweep, o.tol);
  std::ostringstream s;
  s << "max_defect=" << format_double(r.max_defect) << " argmax_omega=" << format_double(r.argmax_omega)
    << " tol=" << format_double(o.tol) << " result=" << (r.pass ? "pass" : "fail") << '\n';
  emit(o, s.str(), out);
  return r.pass ? Ok : CheckFailed;
}

inline int cmd_classify(const Options& o, std::ostream& out) {
  const auto spec = load(o);
  const auto id = system_of(o, spec, false);
  const auto modes = classify_modes(build_system(spec, id).P().matrix());
  std::ostringstream s;
  s << "mode,a,C,labels\n";
  for (std::size_t q = 0; q < modes.size(); ++q)
    s << q + 1 << ',' << format_double(modes[q].a) << ',' << format_double(modes[q].C) << ','
      << labels_text(modes[q].labels) << '\n';
  emit(o, s.str(), out);
  return Ok;
}

inline int cmd_riegle_vs_solve(const Options& o, std::ostream& out) {
  if (o.samples == 0) throw FlagError("--samples must be positive");
  const auto net = build_graph(load(o));
  const auto [from, to] = endpoints(o, net);
  const auto R = gain_riegle(net.graph, from, to);
  const auto S = gain_direct_solve(net.graph, from, to);
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> re(0.05, 1.0), im(-10.0, 10.0);
  double worst = 0;
  for (std::size_t q = 0; q < o.samples; ++q) {
    const double a = re(rng), b = im(rng);
    const cplx s(a, b);
    worst = std::max(worst, (R.eval_doubled(s) - S.eval_doubled(s)).norm());
  }
  const bool pass = worst <= o.tol;
  std::ostringstream s;
  s << "max_deviation=" << format_double(worst) << " samples=" << o.samples << " seed=" << o.seed
    << " result=" << (pass ? "pass" : "fail") << '\n';
  emit(o, s.str(), out);
  return pass ? Ok : CheckFailed;
}

inline int cmd_simulate(const Options& o, std::ostream& out) {
  const auto spec = load(o);
  const auto sys = build_system(spec, system_of(o, spec, true));
  SimulationConfig cfg;
  cfg.dt = o.dt;
  cfg.T = o.T;
  cfg.channel = o.channel;
  if (o.signal == "impulse") cfg.input = Impulse{};
  else if (o.signal == "sinusoid") cfg.input = Sinusoid{o.omega};
  else if (o.signal == "chirp") cfg.input = Chirp{o.sweep.wmin, o.sweep.wmax};
  else throw FlagError("--signal must be impulse, chirp or sinusoid");
  try {
    validate(cfg, sys);
  } catch (const Error& e) {
    throw FlagError(e.what());
  }
  std::ostringstream csv;
  write_csv(csv, simulate_io(sys, cfg), o.stride);
  emit(o, csv.str(), out);
  return Ok;
}

}  // namespace detail

/// Runs the command line; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Quantum network transfer functions from netlists"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-i,--input", o.input, "netlist file (.qn)")->required();
    sub->add_option("-o,--output", o.output, "output file, stdout when absent");
  };
  auto endpoints = [&](CLI::App* sub) {
    sub->add_option("--from", o.from, "source node, default from the first query");
    sub->add_option("--to", o.to, "sink node, default from the first query");
  };
  auto sweep = [&](CLI::App* sub) {
    sub->add_option("--wmin", o.sweep.wmin, "lowest angular frequency");
    sub->add_option("--wmax", o.sweep.wmax, "highest angular frequency");
    sub->add_option("--points", o.sweep.points, "grid points");
    sub->add_option("--scale", o.scale, "log or linear");
  };

  auto* gain = app.add_subcommand("gain", "sweep a node-to-node gain into CSV");
  common(gain);
  endpoints(gain);
  sweep(gain);

  auto* unit = app.add_subcommand("check-unitarity", "report the worst flat-unitarity defect over a sweep");
  common(unit);
  endpoints(unit);
  sweep(unit);
  unit->add_option("--tol", o.tol, "pass threshold");

  auto* cls = app.add_subcommand("classify", "mode table of a system generator");
  common(cls);
  cls->add_option("--system", o.system, "system identifier, default the first one");

  auto* rvs = app.add_subcommand("riegle-vs-solve", "compare the path rule with a direct solve at random s");
  common(rvs);
  endpoints(rvs);
  rvs->add_option("--samples", o.samples, "number of random s points");
  rvs->add_option("--seed", o.seed, "random seed");
  rvs->add_option("--tol", o.tol, "pass threshold");

  auto* sim = app.add_subcommand("simulate", "integrate the time-domain dynamics into CSV");
  common(sim);
  sim->add_option("--system", o.system, "system identifier, default the first coupled one");
  sim->add_option("--dt", o.dt, "time step");
  sim->add_option("--T", o.T, "horizon");
  sim->add_option("--signal", o.signal, "impulse, chirp or sinusoid");
  sim->add_option("--omega", o.omega, "sinusoid frequency");
  sim->add_option("--wmin", o.sweep.wmin, "chirp start frequency");
  sim->add_option("--wmax", o.sweep.wmax, "chirp end frequency");
  sim->add_option("--channel", o.channel, "driven doubled input entry");
  sim->add_option("--stride", o.stride, "write every n-th step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? Ok : BadFlags;
  }

  try {
    if (gain->parsed()) return detail::cmd_gain(o, out);
    if (unit->parsed()) return detail::cmd_check_unitarity(o, out);
    if (cls->parsed()) return detail::cmd_classify(o, out);
    if (rvs->parsed()) return detail::cmd_riegle_vs_solve(o, out);
    return detail::cmd_simulate(o, out);
  } catch (const FlagError& e) {
    err << "error: " << e.what() << '\n';
    return BadFlags;
  } catch (const ParseError& e) {
    err << o.input << ':' << e.what() << '\n';
    return InputError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return NumericError;
  }
}

}  // namespace qnet::cli
