#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dmatrix.hpp"
#include "error.hpp"
#include "netlib.hpp"
#include "sfg.hpp"
#include "tfcore.hpp"

namespace qnet {

/// 1-based line and column of a token; length in bytes.
struct Span {
  std::size_t line = 0;
  std::size_t column = 0;
  std::size_t length = 0;

  /// Spans never take part in structural comparison of specs.
  friend constexpr bool operator==(const Span&, const Span&) { return true; }
};

enum class ParseErrorCode { SyntaxError, UnresolvedIdentifier, ShapeMismatch, DuplicateIdentifier, InvalidValue, NotPassive };

inline const char* to_string(ParseErrorCode c) {
  switch (c) {
    case ParseErrorCode::SyntaxError: return "syntax-error";
    case ParseErrorCode::UnresolvedIdentifier: return "unresolved-identifier";
    case ParseErrorCode::ShapeMismatch: return "shape-mismatch";
    case ParseErrorCode::DuplicateIdentifier: return "duplicate-identifier";
    case ParseErrorCode::InvalidValue: return "invalid-value";
    case ParseErrorCode::NotPassive: return "not-passive";
  }
  return "unknown";
}

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorCode code, Span span, const std::string& message)
      : std::runtime_error(std::to_string(span.line) + ":" + std::to_string(span.column) + ": " + to_string(code) +
                           ": " + message),
        code_(code),
        span_(span),
        message_(message) {}

  ParseErrorCode code() const { return code_; }
  const Span& span() const { return span_; }
  const std::string& message() const { return message_; }

 private:
  ParseErrorCode code_;
  Span span_;
  std::string message_;
};

struct SystemDecl {
  std::string id;
  std::size_t modes = 0;
  DMatrix P;
  Span span, p_span;
  friend bool operator==(const SystemDecl&, const SystemDecl&) = default;
};

/// Lorentzian kernels are stored with one channel and widened to the coupling that uses them.
struct KernelDecl {
  std::string id;
  MemoryKernel kernel;
  Span span, value_span;
  friend bool operator==(const KernelDecl&, const KernelDecl&) = default;
};

struct CoupleDecl {
  std::string system, kernel;
  DMatrix D;
  Span span, system_span, kernel_span, d_span;
  friend bool operator==(const CoupleDecl&, const CoupleDecl&) = default;
};

struct SplitterDecl {
  std::string id;
  DMatrix t1, r1, r2, t2;
  Span span, value_span;
  friend bool operator==(const SplitterDecl&, const SplitterDecl&) = default;
};

struct DelayDecl {
  std::string id;
  double tau = 0;
  Span span, value_span;
  friend bool operator==(const DelayDecl&, const DelayDecl&) = default;
};

struct NodeDecl {
  std::string id;
  std::size_t width = 0;
  Span span, value_span;
  friend bool operator==(const NodeDecl&, const NodeDecl&) = default;
};

/// One factor of an arc gain: a literal, io(sys), delay(id), sp(id.part) or res(sys) = (sI - P)^-1.
struct Term {
  enum class Kind { Matrix, IO, Delay, Splitter, Resolvent };
  Kind kind = Kind::Matrix;
  DMatrix matrix;
  std::string ref;
  std::string part;
  Span span, ref_span;
  friend bool operator==(const Term&, const Term&) = default;
};

struct ArcDecl {
  std::string from, to;
  std::vector<Term> terms;
  Span span, from_span, to_span;
  friend bool operator==(const ArcDecl&, const ArcDecl&) = default;
};

struct QueryDecl {
  std::string from, to;
  Span span, from_span, to_span;
  friend bool operator==(const QueryDecl&, const QueryDecl&) = default;
};

struct NetworkSpec {
  std::vector<SystemDecl> systems;
  std::vector<KernelDecl> kernels;
  std::vector<CoupleDecl> couplings;
  std::vector<SplitterDecl> splitters;
  std::vector<DelayDecl> delays;
  std::vector<NodeDecl> nodes;
  std::vector<ArcDecl> arcs;
  std::vector<QueryDecl> queries;
  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

inline constexpr std::size_t kMaxWidth = 64;

namespace netdsl_detail {

enum class Tok { Ident, Number, Arrow, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string_view text;
  Span span;
};

inline bool ident_start(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; }
inline bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
inline bool digit(char c) { return c >= '0' && c <= '9'; }

inline std::vector<Token> lex_line(std::string_view line, std::size_t lineno) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto span = [&](std::size_t from, std::size_t to) { return Span{lineno, from + 1, to - from}; };
  while (i < line.size()) {
    const char c = line[i];
    if (c == '#') break;
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    const std::size_t start = i;
    if (ident_start(c)) {
      while (i < line.size() && ident_char(line[i])) ++i;
      out.push_back({Tok::Ident, line.substr(start, i - start), span(start, i)});
      continue;
    }
    if (c == '-' && i + 1 < line.size() && line[i + 1] == '>') {
      i += 2;
      out.push_back({Tok::Arrow, line.substr(start, 2), span(start, i)});
      continue;
    }
    const bool sign = c == '+' || c == '-';
    const std::size_t body = start + (sign ? 1 : 0);
    if (body < line.size() &&
        (digit(line[body]) || (line[body] == '.' && body + 1 < line.size() && digit(line[body + 1])))) {
      i = body;
      while (i < line.size() && digit(line[i])) ++i;
      if (i < line.size() && line[i] == '.') {
        ++i;
        while (i < line.size() && digit(line[i])) ++i;
      }
      if (i < line.size() && (line[i] == 'e' || line[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < line.size() && (line[j] == '+' || line[j] == '-')) ++j;
        if (j >= line.size() || !digit(line[j]))
          throw ParseError(ParseErrorCode::SyntaxError, span(start, j), "malformed exponent");
        while (j < line.size() && digit(line[j])) ++j;
        i = j;
      }
      if (i < line.size() && (ident_char(line[i]) || line[i] == '.'))
        throw ParseError(ParseErrorCode::SyntaxError, span(start, i + 1), "malformed number");
      out.push_back({Tok::Number, line.substr(start, i - start), span(start, i)});
      continue;
    }
    if (std::string_view("[](),;=*.").find(c) != std::string_view::npos) {
      ++i;
      out.push_back({Tok::Punct, line.substr(start, 1), span(start, i)});
      continue;
    }
    throw ParseError(ParseErrorCode::SyntaxError, span(start, start + 1), "unexpected character");
  }
  out.push_back({Tok::End, {}, span(line.size(), line.size())});
  return out;
}

/// Converts library errors raised while building values into diagnostics at `span`.
template <typename F>
auto guarded(const Span& span, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    ParseErrorCode code = ParseErrorCode::InvalidValue;
    if (e.code() == ErrorCode::DimensionMismatch) code = ParseErrorCode::ShapeMismatch;
    if (e.code() == ErrorCode::NotPassive) code = ParseErrorCode::NotPassive;
    throw ParseError(code, span, e.what());
  }
}

class LineParser {
 public:
  LineParser(std::vector<Token> toks, NetworkSpec& spec) : toks_(std::move(toks)), spec_(spec) {}

  void statement() {
    if (peek().kind == Tok::End) return;
    const Token head = expect_ident("statement keyword");
    const std::string_view kw = head.text;
    if (kw == "system") system(head);
    else if (kw == "kernel") kernel(head);
    else if (kw == "couple") couple(head);
    else if (kw == "splitter") splitter(head);
    else if (kw == "delay") delay(head);
    else if (kw == "node") node(head);
    else if (kw == "arc") arc(head);
    else if (kw == "query") query(head);
    else throw ParseError(ParseErrorCode::SyntaxError, head.span, "unknown statement '" + std::string(kw) + "'");
    if (peek().kind != Tok::End) throw ParseError(ParseErrorCode::SyntaxError, peek().span, "unexpected trailing token");
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  Token next() {
    Token t = toks_[pos_];
    if (t.kind != Tok::End) ++pos_;
    return t;
  }
  [[noreturn]] void fail(const Token& t, const std::string& what) const {
    const std::string got = t.kind == Tok::End ? "end of line" : "'" + std::string(t.text) + "'";
    throw ParseError(ParseErrorCode::SyntaxError, t.span, "expected " + what + ", found " + got);
  }
  Token expect_ident(const std::string& what) {
    if (peek().kind != Tok::Ident) fail(peek(), what);
    return next();
  }
  Token expect_keyword(std::string_view kw) {
    if (peek().kind != Tok::Ident || peek().text != kw) fail(peek(), "'" + std::string(kw) + "'");
    return next();
  }
  Token expect_punct(char c) {
    if (peek().kind != Tok::Punct || peek().text[0] != c) fail(peek(), std::string("'") + c + "'");
    return next();
  }
  bool accept_punct(char c) {
    if (peek().kind == Tok::Punct && peek().text[0] == c) {
      next();
      return true;
    }
    return false;
  }

  std::pair<double, Span> number() {
    if (peek().kind != Tok::Number) fail(peek(), "number");
    const Token t = next();
    std::string_view s = t.text;
    if (!s.empty() && s[0] == '+') s.remove_prefix(1);
    double v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
      throw ParseError(ParseErrorCode::InvalidValue, t.span, "number out of range");
    return {v, t.span};
  }

  std::pair<std::size_t, Span> count() {
    if (peek().kind != Tok::Number) fail(peek(), "integer");
    const Token t = next();
    std::size_t v = 0;
    const auto r = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (r.ec == std::errc::result_out_of_range)
      throw ParseError(ParseErrorCode::InvalidValue, t.span, "integer out of range");
    if (r.ec != std::errc() || r.ptr != t.text.data() + t.text.size())
      throw ParseError(ParseErrorCode::SyntaxError, t.span, "expected a non-negative integer");
    return {v, t.span};
  }

  DNum dnum() {
    const Token t = expect_ident("'d' or 'c' literal");
    if (t.text != "d" && t.text != "c") fail(t, "'d' or 'c' literal");
    expect_punct('(');
    double v[4];
    for (int q = 0; q < 4; ++q) {
      if (q) expect_punct(',');
      v[q] = number().first;
    }
    expect_punct(')');
    // d(a,b,c,d) lists basis coefficients; c(are,aim,bre,bim) lists alpha and beta parts. Both coincide.
    return {v[0], v[1], v[2], v[3]};
  }

  std::pair<DMatrix, Span> dmat() {
    const Token open = expect_punct('[');
    std::vector<std::vector<DNum>> rows(1);
    rows.back().push_back(dnum());
    while (true) {
      if (accept_punct(',')) rows.back().push_back(dnum());
      else if (accept_punct(';')) {
        rows.emplace_back();
        rows.back().push_back(dnum());
      } else break;
    }
    const Token close = expect_punct(']');
    Span span = open.span;
    span.length = close.span.column + 1 - open.span.column;
    for (const auto& r : rows)
      if (r.size() != rows[0].size()) throw ParseError(ParseErrorCode::ShapeMismatch, span, "ragged matrix literal");
    DMatrix m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
    return {m, span};
  }

  std::pair<DMatrix, Span> keyed_dmat(std::string_view key) {
    expect_keyword(key);
    expect_punct('=');
    return dmat();
  }
  std::pair<double, Span> keyed_number(std::string_view key) {
    expect_keyword(key);
    expect_punct('=');
    return number();
  }

  void system(const Token&) {
    SystemDecl d;
    const Token id = expect_ident("system identifier");
    d.id = id.text;
    d.span = id.span;
    expect_keyword("modes");
    d.modes = count().first;
    expect_keyword("P");
    std::tie(d.P, d.p_span) = dmat();
    spec_.systems.push_back(std::move(d));
  }

  void kernel(const Token&) {
    const Token id = expect_ident("kernel identifier");
    const Token kind = expect_ident("kernel kind");
    std::optional<MemoryKernel> k;
    if (kind.text == "lorentzian") {
      const double kappa = keyed_number("kappa").first;
      const double gamma = keyed_number("gamma").first;
      k = guarded(kind.span, [&] { return MemoryKernel::lorentzian(kappa, gamma); });
    } else if (kind.text == "markov") {
      auto [n0, span] = keyed_dmat("n0");
      k = guarded(span, [&] { return MemoryKernel::markov(n0); });
    } else if (kind.text == "expmode") {
      auto [E, es] = keyed_dmat("E");
      auto [Q, qs] = keyed_dmat("Q");
      const Generator G = guarded(qs, [&] { return Generator(Q); });
      k = guarded(es, [&] { return MemoryKernel::exp_mode(E, G); });
    } else {
      fail(kind, "'lorentzian', 'markov' or 'expmode'");
    }
    spec_.kernels.push_back({std::string(id.text), *k, id.span, kind.span});
  }

  void couple(const Token& head) {
    CoupleDecl d;
    d.span = head.span;
    const Token sys = expect_ident("system identifier");
    const Token ker = expect_ident("kernel identifier");
    d.system = sys.text;
    d.kernel = ker.text;
    d.system_span = sys.span;
    d.kernel_span = ker.span;
    std::tie(d.D, d.d_span) = keyed_dmat("D");
    spec_.couplings.push_back(std::move(d));
  }

  void splitter(const Token&) {
    SplitterDecl d;
    const Token id = expect_ident("splitter identifier");
    d.id = id.text;
    d.span = id.span;
    Span first;
    std::tie(d.t1, first) = keyed_dmat("t1");
    d.r1 = keyed_dmat("r1").first;
    d.r2 = keyed_dmat("r2").first;
    d.t2 = keyed_dmat("t2").first;
    d.value_span = first;
    spec_.splitters.push_back(std::move(d));
  }

  void delay(const Token&) {
    DelayDecl d;
    const Token id = expect_ident("delay identifier");
    d.id = id.text;
    d.span = id.span;
    std::tie(d.tau, d.value_span) = keyed_number("tau");
    spec_.delays.push_back(std::move(d));
  }

  void node(const Token&) {
    NodeDecl d;
    const Token id = expect_ident("node identifier");
    d.id = id.text;
    d.span = id.span;
    expect_keyword("width");
    std::tie(d.width, d.value_span) = count();
    spec_.nodes.push_back(std::move(d));
  }

  Term term() {
    Term t;
    const Token& first = peek();
    t.span = first.span;
    if (first.kind == Tok::Punct && first.text[0] == '[') {
      std::tie(t.matrix, t.span) = dmat();
      return t;
    }
    const Token fn = expect_ident("gain term");
    if (fn.text == "io") t.kind = Term::Kind::IO;
    else if (fn.text == "delay") t.kind = Term::Kind::Delay;
    else if (fn.text == "sp") t.kind = Term::Kind::Splitter;
    else if (fn.text == "res") t.kind = Term::Kind::Resolvent;
    else fail(fn, "'[', 'io', 'delay', 'sp' or 'res'");
    expect_punct('(');
    const Token ref = expect_ident("identifier");
    t.ref = ref.text;
    t.ref_span = ref.span;
    if (t.kind == Term::Kind::Splitter) {
      expect_punct('.');
      const Token part = expect_ident("splitter block");
      if (part.text != "t1" && part.text != "r1" && part.text != "r2" && part.text != "t2")
        fail(part, "'t1', 'r1', 'r2' or 't2'");
      t.part = part.text;
    }
    const Token close = expect_punct(')');
    t.span.length = close.span.column + 1 - fn.span.column;
    return t;
  }

  void arc(const Token& head) {
    ArcDecl d;
    d.span = head.span;
    const Token from = expect_ident("source node");
    if (peek().kind != Tok::Arrow) fail(peek(), "'->'");
    next();
    const Token to = expect_ident("target node");
    d.from = from.text;
    d.to = to.text;
    d.from_span = from.span;
    d.to_span = to.span;
    expect_keyword("gain");
    d.terms.push_back(term());
    while (accept_punct('*')) d.terms.push_back(term());
    spec_.arcs.push_back(std::move(d));
  }

  void query(const Token& head) {
    QueryDecl d;
    d.span = head.span;
    expect_keyword("gain");
    expect_keyword("from");
    const Token from = expect_ident("source node");
    expect_keyword("to");
    const Token to = expect_ident("target node");
    d.from = from.text;
    d.to = to.text;
    d.from_span = from.span;
    d.to_span = to.span;
    spec_.queries.push_back(std::move(d));
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  NetworkSpec& spec_;
};

template <typename Decl>
std::map<std::string, const Decl*> index_unique(const std::vector<Decl>& decls, const char* kind) {
  std::map<std::string, const Decl*> out;
  for (const auto& d : decls)
    if (!out.emplace(d.id, &d).second)
      throw ParseError(ParseErrorCode::DuplicateIdentifier, d.span, std::string(kind) + " '" + d.id + "' already declared");
  return out;
}

template <typename Decl>
const Decl& resolve(const std::map<std::string, const Decl*>& table, const std::string& id, const Span& span,
                    const char* kind) {
  const auto it = table.find(id);
  if (it == table.end())
    throw ParseError(ParseErrorCode::UnresolvedIdentifier, span, std::string("unknown ") + kind + " '" + id + "'");
  return *it->second;
}

/// Resolved lookup tables of a checked spec.
struct Tables {
  std::map<std::string, const SystemDecl*> systems;
  std::map<std::string, const KernelDecl*> kernels;
  std::map<std::string, const SplitterDecl*> splitters;
  std::map<std::string, const DelayDecl*> delays;
  std::map<std::string, const NodeDecl*> nodes;
  std::map<std::string, std::size_t> channels;
};

inline const DMatrix& splitter_block(const SplitterDecl& s, const std::string& part) {
  if (part == "t1") return s.t1;
  if (part == "r1") return s.r1;
  if (part == "r2") return s.r2;
  return s.t2;
}

/// Shape of a gain term; nullopt marks a delay, which adapts to the width around it.
inline std::optional<std::pair<std::size_t, std::size_t>> term_shape(const Term& t, const Tables& tb) {
  switch (t.kind) {
    case Term::Kind::Matrix: return std::pair{t.matrix.rows(), t.matrix.cols()};
    case Term::Kind::IO: {
      resolve(tb.systems, t.ref, t.ref_span, "system");
      const std::size_t k = tb.channels.at(t.ref);
      if (k == 0) throw ParseError(ParseErrorCode::ShapeMismatch, t.span, "system '" + t.ref + "' has no couplings");
      return std::pair{k, k};
    }
    case Term::Kind::Resolvent: {
      const auto& s = resolve(tb.systems, t.ref, t.ref_span, "system");
      return std::pair{s.modes, s.modes};
    }
    case Term::Kind::Splitter: {
      const auto& b = splitter_block(resolve(tb.splitters, t.ref, t.ref_span, "splitter"), t.part);
      return std::pair{b.rows(), b.cols()};
    }
    case Term::Kind::Delay: resolve(tb.delays, t.ref, t.ref_span, "delay"); return std::nullopt;
  }
  return std::nullopt;
}

/// Width each delay term takes in the product, left to right; throws on a broken chain.
inline std::vector<std::size_t> chain_widths(const ArcDecl& a, const Tables& tb) {
  const std::size_t out = tb.nodes.at(a.to)->width, in = tb.nodes.at(a.from)->width;
  std::vector<std::size_t> widths;
  std::size_t expected = out;
  for (const auto& t : a.terms) {
    const auto shape = term_shape(t, tb);
    if (!shape) {
      widths.push_back(expected);
      continue;
    }
    if (shape->first != expected)
      throw ParseError(ParseErrorCode::ShapeMismatch, t.span,
                       "term has " + std::to_string(shape->first) + " rows where " + std::to_string(expected) +
                           " are needed on arc " + a.from + " -> " + a.to);
    widths.push_back(shape->first);
    expected = shape->second;
  }
  if (expected != in)
    throw ParseError(ParseErrorCode::ShapeMismatch, a.terms.back().span,
                     "gain has " + std::to_string(expected) + " columns but node '" + a.from + "' has width " +
                         std::to_string(in));
  return widths;
}

inline Tables check(const NetworkSpec& spec) {
  Tables tb;
  tb.systems = index_unique(spec.systems, "system");
  tb.kernels = index_unique(spec.kernels, "kernel");
  tb.splitters = index_unique(spec.splitters, "splitter");
  tb.delays = index_unique(spec.delays, "delay");
  tb.nodes = index_unique(spec.nodes, "node");

  for (const auto& s : spec.systems) {
    if (s.modes == 0 || s.modes > kMaxWidth)
      throw ParseError(ParseErrorCode::InvalidValue, s.span, "mode count must lie in [1, 64]");
    if (s.P.rows() != s.modes || s.P.cols() != s.modes)
      throw ParseError(ParseErrorCode::ShapeMismatch, s.p_span, "P must be " + std::to_string(s.modes) + "x" +
                                                                    std::to_string(s.modes));
    guarded(s.p_span, [&] { return Generator(s.P); });
    tb.channels[s.id] = 0;
  }
  for (const auto& c : spec.couplings) {
    const auto& s = resolve(tb.systems, c.system, c.system_span, "system");
    const auto& k = resolve(tb.kernels, c.kernel, c.kernel_span, "kernel");
    if (c.D.rows() != s.modes)
      throw ParseError(ParseErrorCode::ShapeMismatch, c.d_span, "D must have one row per mode of '" + s.id + "'");
    guarded(c.d_span, [&] { return k.kernel.resized(c.D.cols()); });
    tb.channels[s.id] += c.D.cols();
    if (tb.channels[s.id] > kMaxWidth)
      throw ParseError(ParseErrorCode::InvalidValue, c.d_span, "too many field channels");
  }
  for (const auto& s : spec.splitters) guarded(s.value_span, [&] { return beam_splitter(s.t1, s.r1, s.r2, s.t2); });
  for (const auto& d : spec.delays)
    if (!(d.tau >= 0)) throw ParseError(ParseErrorCode::InvalidValue, d.value_span, "delay must be non-negative");
  for (const auto& n : spec.nodes)
    if (n.width == 0 || n.width > kMaxWidth)
      throw ParseError(ParseErrorCode::InvalidValue, n.value_span, "node width must lie in [1, 64]");
  if (spec.nodes.size() > 64) throw ParseError(ParseErrorCode::InvalidValue, spec.nodes[64].span, "at most 64 nodes");
  for (const auto& a : spec.arcs) {
    resolve(tb.nodes, a.from, a.from_span, "node");
    resolve(tb.nodes, a.to, a.to_span, "node");
    chain_widths(a, tb);
  }
  for (const auto& q : spec.queries) {
    resolve(tb.nodes, q.from, q.from_span, "node");
    resolve(tb.nodes, q.to, q.to_span, "node");
  }
  return tb;
}

}  // namespace netdsl_detail

/// Parses and checks a netlist; every failure is a ParseError carrying a source span.
inline NetworkSpec parse_network(std::string_view text) {
  NetworkSpec spec;
  std::size_t lineno = 0;
  while (!text.empty() || lineno == 0) {
    ++lineno;
    const std::size_t nl = text.find('\n');
    const std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    netdsl_detail::LineParser(netdsl_detail::lex_line(line, lineno), spec).statement();
  }
  netdsl_detail::check(spec);
  return spec;
}

/// Canonical text: declarations grouped by kind in the grammar order, numbers with 17 digits.
inline std::string serialize(const NetworkSpec& spec) {
  std::ostringstream os;
  for (const auto& s : spec.systems) os << "system " << s.id << " modes " << s.modes << " P " << to_literal(s.P) << '\n';
  for (const auto& k : spec.kernels) {
    os << "kernel " << k.id << ' ';
    std::visit(
        [&](const auto& v) {
          using K = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<K, MemoryKernel::Lorentzian>)
            os << "lorentzian kappa=" << format_double(v.kappa) << " gamma=" << format_double(v.gamma);
          else if constexpr (std::is_same_v<K, MemoryKernel::MarkovDelta>)
            os << "markov n0=" << to_literal(v.n0);
          else
            os << "expmode E=" << to_literal(v.E) << " Q=" << to_literal(v.Q);
        },
        k.kernel.variant());
    os << '\n';
  }
  for (const auto& c : spec.couplings) os << "couple " << c.system << ' ' << c.kernel << " D=" << to_literal(c.D) << '\n';
  for (const auto& s : spec.splitters)
    os << "splitter " << s.id << " t1=" << to_literal(s.t1) << " r1=" << to_literal(s.r1) << " r2=" << to_literal(s.r2)
       << " t2=" << to_literal(s.t2) << '\n';
  for (const auto& d : spec.delays) os << "delay " << d.id << " tau=" << format_double(d.tau) << '\n';
  for (const auto& n : spec.nodes) os << "node " << n.id << " width " << n.width << '\n';
  for (const auto& a : spec.arcs) {
    os << "arc " << a.from << " -> " << a.to << " gain ";
    for (std::size_t q = 0; q < a.terms.size(); ++q) {
      const auto& t = a.terms[q];
      if (q) os << " * ";
      switch (t.kind) {
        case Term::Kind::Matrix: os << to_literal(t.matrix); break;
        case Term::Kind::IO: os << "io(" << t.ref << ')'; break;
        case Term::Kind::Delay: os << "delay(" << t.ref << ')'; break;
        case Term::Kind::Splitter: os << "sp(" << t.ref << '.' << t.part << ')'; break;
        case Term::Kind::Resolvent: os << "res(" << t.ref << ')'; break;
      }
    }
    os << '\n';
  }
  for (const auto& q : spec.queries) os << "query gain from " << q.from << " to " << q.to << '\n';
  return os.str();
}

/// Assembles the system `id` with its couplings in declaration order.
inline IOSystem build_system(const NetworkSpec& spec, const std::string& id) {
  const auto tb = netdsl_detail::check(spec);
  const auto it = tb.systems.find(id);
  if (it == tb.systems.end())
    throw ParseError(ParseErrorCode::UnresolvedIdentifier, Span{}, "unknown system '" + id + "'");
  std::vector<Coupling> couplings;
  for (const auto& c : spec.couplings)
    if (c.system == id) couplings.push_back({c.D, tb.kernels.at(c.kernel)->kernel.resized(c.D.cols())});
  return IOSystem(Generator(it->second->P), std::move(couplings));
}

struct BuiltNetwork {
  SignalFlowGraph graph;
  std::map<std::string, TransferMap> io;
  std::vector<QueryDecl> queries;
};

inline BuiltNetwork build_graph(const NetworkSpec& spec) {
  const auto tb = netdsl_detail::check(spec);
  BuiltNetwork out;
  for (const auto& s : spec.systems)
    if (tb.channels.at(s.id) > 0) out.io.emplace(s.id, io_transfer_multi(build_system(spec, s.id)));
  for (const auto& n : spec.nodes) out.graph.add_node(n.id, n.width);
  for (const auto& a : spec.arcs) {
    const auto widths = netdsl_detail::chain_widths(a, tb);
    std::optional<TransferMap> gain;
    for (std::size_t q = 0; q < a.terms.size(); ++q) {
      const auto& t = a.terms[q];
      TransferMap m;
      switch (t.kind) {
        case Term::Kind::Matrix: m = TransferMap::constant(t.matrix); break;
        case Term::Kind::IO: m = out.io.at(t.ref); break;
        case Term::Kind::Delay: m = TransferMap::delay(tb.delays.at(t.ref)->tau, widths[q]); break;
        case Term::Kind::Splitter:
          m = TransferMap::constant(netdsl_detail::splitter_block(*tb.splitters.at(t.ref), t.part));
          break;
        case Term::Kind::Resolvent: {
          const DMatrix& P = tb.systems.at(t.ref)->P;
          m = TransferMap::resolvent(DMatrix::identity(P.rows()), P, DMatrix::identity(P.rows()));
          break;
        }
      }
      gain = gain ? *gain * m : m;
    }
    netdsl_detail::guarded(a.span, [&] {
      out.graph.add_arc(a.from, a.to, *gain);
      return 0;
    });
  }
  out.queries = spec.queries;
  return out;
}

inline TransferMap query_gain(const BuiltNetwork& net, const QueryDecl& q) {
  return gain_riegle(net.graph, q.from, q.to);
}

}  // namespace qnet
