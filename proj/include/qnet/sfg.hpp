#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "tfcore.hpp"

namespace qnet {

/// Directed graph of signal nodes; each node equals the sum of its incoming arc gains times their origins.
class SignalFlowGraph {
 public:
  struct Node {
    std::string name;
    std::size_t width;
  };
  struct Arc {
    std::size_t from, to;
    TransferMap gain;
  };

  std::size_t add_node(const std::string& name, std::size_t width) {
    if (index_.count(name)) throw Error(ErrorCode::InvalidArgument, "duplicate node '" + name + "'");
    if (width == 0) throw Error(ErrorCode::InvalidArgument, "node '" + name + "' must have positive width");
    index_[name] = nodes_.size();
    nodes_.push_back({name, width});
    return nodes_.size() - 1;
  }

  void add_arc(const std::string& from, const std::string& to, TransferMap gain) {
    const std::size_t f = index(from), t = index(to);
    if (gain.rows() != nodes_[t].width || gain.cols() != nodes_[f].width)
      throw Error(ErrorCode::DimensionMismatch, "arc " + from + " -> " + to + " has gain shape " +
                                                    std::to_string(gain.rows()) + "x" + std::to_string(gain.cols()) +
                                                    ", expected " + std::to_string(nodes_[t].width) + "x" +
                                                    std::to_string(nodes_[f].width));
    arcs_.push_back({f, t, std::move(gain)});
  }

  bool has_node(const std::string& name) const { return index_.count(name) > 0; }
  std::size_t index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error(ErrorCode::UnknownNode, "no node named '" + name + "'");
    return it->second;
  }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Arc>& arcs() const { return arcs_; }
  std::size_t width(const std::string& name) const { return nodes_[index(name)].width; }

 private:
  std::vector<Node> nodes_;
  std::vector<Arc> arcs_;
  std::map<std::string, std::size_t> index_;
};

namespace detail {

/// Arc gains of a graph evaluated at one s, parallel arcs summed, in doubled form.
struct GraphAtS {
  std::size_t n = 0;
  std::vector<Eigen::Index> w;  // doubled widths
  std::map<std::pair<std::size_t, std::size_t>, Eigen::MatrixXcd> gain;  // (to, from)

  GraphAtS(const SignalFlowGraph& g, cplx s) : n(g.nodes().size()) {
    for (const auto& node : g.nodes()) w.push_back(static_cast<Eigen::Index>(2 * node.width));
    for (const auto& arc : g.arcs()) {
      Eigen::MatrixXcd v = arc.gain.eval_doubled(s);
      auto [it, fresh] = gain.try_emplace({arc.to, arc.from}, v);
      if (!fresh) it->second += v;
    }
  }

  /// (I - T_SS) restricted to the ordered node subset S, plus offsets.
  Eigen::MatrixXcd loop_difference(const std::vector<std::size_t>& S, std::vector<Eigen::Index>& off) const {
    off.assign(n, -1);
    Eigen::Index total = 0;
    for (auto v : S) off[v] = total, total += w[v];
    Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(total, total);
    for (const auto& [key, m] : gain) {
      const auto [to, from] = key;
      if (off[to] < 0 || off[from] < 0) continue;
      A.block(off[to], off[from], w[to], w[from]) -= m;
    }
    return A;
  }

  /// Block (sink, source) of (I - T)^-1 over all nodes.
  Eigen::MatrixXcd direct(std::size_t source, std::size_t sink, cplx s) const {
    std::vector<std::size_t> all(n);
    for (std::size_t v = 0; v < n; ++v) all[v] = v;
    std::vector<Eigen::Index> off;
    const Eigen::MatrixXcd A = loop_difference(all, off);
    Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(A.rows(), w[source]);
    rhs.block(off[source], 0, w[source], w[source]).setIdentity();
    Eigen::MatrixXcd X;
    if (!checked_solve(A, rhs, X)) throw Error(ErrorCode::SingularAt, "loop difference is singular", s);
    return X.block(off[sink], 0, w[sink], w[source]);
  }

  /// Inverse loop difference at v in the subgraph of nodes in `active` (v included).
  /// v is split into an emitting copy and a receiving copy; the return gain between them is
  /// T_vv + T_vU (I - T_UU)^-1 T_Uv with U = active \ {v}.
  Eigen::MatrixXcd frl(std::size_t v, std::uint64_t active, cplx s) const {
    std::vector<std::size_t> U;
    for (std::size_t u = 0; u < n; ++u)
      if (u != v && (active >> u & 1u)) U.push_back(u);
    Eigen::MatrixXcd L = Eigen::MatrixXcd::Zero(w[v], w[v]);
    if (auto it = gain.find({v, v}); it != gain.end()) L += it->second;
    if (!U.empty()) {
      std::vector<Eigen::Index> off;
      const Eigen::MatrixXcd A = loop_difference(U, off);
      Eigen::MatrixXcd Tuv = Eigen::MatrixXcd::Zero(A.rows(), w[v]);
      Eigen::MatrixXcd Tvu = Eigen::MatrixXcd::Zero(w[v], A.rows());
      bool any_in = false, any_out = false;
      for (auto u : U) {
        if (auto it = gain.find({u, v}); it != gain.end()) Tuv.block(off[u], 0, w[u], w[v]) = it->second, any_out = true;
        if (auto it = gain.find({v, u}); it != gain.end()) Tvu.block(0, off[u], w[v], w[u]) = it->second, any_in = true;
      }
      if (any_in && any_out) {
        Eigen::MatrixXcd X;
        if (!checked_solve(A, Tuv, X)) throw Error(ErrorCode::SingularAt, "loop difference is singular", s);
        L += Tvu * X;
      }
    }
    Eigen::MatrixXcd F;
    if (!checked_inverse(Eigen::MatrixXcd::Identity(w[v], w[v]) - L, F))
      throw Error(ErrorCode::SingularAt, "forward return loop difference is singular", s);
    return F;
  }

  const Eigen::MatrixXcd* arc(std::size_t to, std::size_t from) const {
    auto it = gain.find({to, from});
    return it == gain.end() ? nullptr : &it->second;
  }
};

inline std::vector<std::vector<std::size_t>> forward_paths(const SignalFlowGraph& g, std::size_t source,
                                                           std::size_t sink) {
  const std::size_t n = g.nodes().size();
  std::vector<std::vector<std::size_t>> succ(n);
  for (const auto& a : g.arcs()) succ[a.from].push_back(a.to);
  for (auto& list : succ) {
    std::sort(list.begin(), list.end(),
              [&](std::size_t x, std::size_t y) { return g.nodes()[x].name < g.nodes()[y].name; });
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> path{source};
  std::vector<bool> on(n, false);
  on[source] = true;
  auto dfs = [&](auto&& self, std::size_t v) -> void {
    if (v == sink) {
      out.push_back(path);
      return;
    }
    for (auto u : succ[v]) {
      if (on[u]) continue;
      on[u] = true;
      path.push_back(u);
      self(self, u);
      path.pop_back();
      on[u] = false;
    }
  };
  dfs(dfs, source);
  return out;
}

inline std::uint64_t all_nodes_mask(std::size_t n) {
  if (n > 64) throw Error(ErrorCode::Unsupported, "gain rule supports at most 64 nodes");
  return n == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
}

/// Active node set used for the FRL factor at position `pos` of `path`: every node strictly
/// downstream on the path is cut out of the graph.
inline std::uint64_t frl_mask(const std::vector<std::size_t>& path, std::size_t pos, std::size_t n) {
  std::uint64_t mask = all_nodes_mask(n);
  for (std::size_t q = pos + 1; q < path.size(); ++q) mask &= ~(std::uint64_t{1} << path[q]);
  return mask;
}

struct FrlCache {
  std::map<std::pair<std::uint64_t, std::size_t>, Eigen::MatrixXcd> table;
  const Eigen::MatrixXcd& get(const GraphAtS& G, std::size_t v, std::uint64_t mask, cplx s) {
    auto [it, fresh] = table.try_emplace({mask, v});
    if (fresh) it->second = G.frl(v, mask, s);
    return it->second;
  }
};

inline Eigen::MatrixXcd path_contribution(const GraphAtS& G, const std::vector<std::size_t>& path, FrlCache& cache,
                                          cplx s) {
  Eigen::MatrixXcd acc = cache.get(G, path[0], frl_mask(path, 0, G.n), s);
  for (std::size_t q = 1; q < path.size(); ++q) {
    const Eigen::MatrixXcd* g = G.arc(path[q], path[q - 1]);
    acc = cache.get(G, path[q], frl_mask(path, q, G.n), s) * (*g * acc);
  }
  return acc;
}

}  // namespace detail

/// Block (sink, source) of (I - T(s))^-1.
inline TransferMap gain_direct_solve(const SignalFlowGraph& g, const std::string& source, const std::string& sink) {
  const std::size_t src = g.index(source), snk = g.index(sink);
  auto graph = std::make_shared<const SignalFlowGraph>(g);
  return TransferMap::function_doubled(g.nodes()[snk].width, g.nodes()[src].width, [graph, src, snk](cplx s) {
    return detail::GraphAtS(*graph, s).direct(src, snk, s);
  });
}

/// Simple paths from source to sink in lexicographic order of node names.
inline std::vector<std::vector<std::string>> enumerate_forward_paths(const SignalFlowGraph& g,
                                                                     const std::string& source,
                                                                     const std::string& sink) {
  std::vector<std::vector<std::string>> out;
  for (const auto& p : detail::forward_paths(g, g.index(source), g.index(sink))) {
    out.emplace_back();
    for (auto v : p) out.back().push_back(g.nodes()[v].name);
  }
  return out;
}

/// Forward return loop factor of `node` on `path`.
inline TransferMap frl_factor(const SignalFlowGraph& g, const std::vector<std::string>& path,
                              const std::string& node) {
  std::vector<std::size_t> ids;
  for (const auto& name : path) ids.push_back(g.index(name));
  auto it = std::find(path.begin(), path.end(), node);
  if (it == path.end()) throw Error(ErrorCode::InvalidArgument, "node '" + node + "' is not on the path");
  const std::size_t pos = static_cast<std::size_t>(it - path.begin());
  const std::uint64_t mask = detail::frl_mask(ids, pos, g.nodes().size());
  const std::size_t v = ids[pos];
  auto graph = std::make_shared<const SignalFlowGraph>(g);
  return TransferMap::function_doubled(g.nodes()[v].width, g.nodes()[v].width, [graph, v, mask](cplx s) {
    return detail::GraphAtS(*graph, s).frl(v, mask, s);
  });
}

struct RiegleTerm {
  std::vector<std::string> path;
  TransferMap contribution;
};

/// Per-path contributions whose sum is the gain.
inline std::vector<RiegleTerm> riegle_terms(const SignalFlowGraph& g, const std::string& source,
                                            const std::string& sink) {
  auto graph = std::make_shared<const SignalFlowGraph>(g);
  const std::size_t src = g.index(source), snk = g.index(sink);
  std::vector<RiegleTerm> out;
  for (const auto& p : detail::forward_paths(g, src, snk)) {
    RiegleTerm t;
    for (auto v : p) t.path.push_back(g.nodes()[v].name);
    t.contribution = TransferMap::function_doubled(g.nodes()[snk].width, g.nodes()[src].width, [graph, p](cplx s) {
      detail::GraphAtS G(*graph, s);
      detail::FrlCache cache;
      return detail::path_contribution(G, p, cache, s);
    });
    out.push_back(std::move(t));
  }
  return out;
}

/// Source-to-sink gain as a sum over forward paths of arc gains interleaved with FRL factors.
inline TransferMap gain_riegle(const SignalFlowGraph& g, const std::string& source, const std::string& sink) {
  const std::size_t src = g.index(source), snk = g.index(sink);
  detail::all_nodes_mask(g.nodes().size());
  auto graph = std::make_shared<const SignalFlowGraph>(g);
  auto paths = std::make_shared<const std::vector<std::vector<std::size_t>>>(detail::forward_paths(g, src, snk));
  const auto rows = static_cast<Eigen::Index>(2 * g.nodes()[snk].width);
  const auto cols = static_cast<Eigen::Index>(2 * g.nodes()[src].width);
  return TransferMap::function_doubled(g.nodes()[snk].width, g.nodes()[src].width,
                                       [graph, paths, rows, cols](cplx s) {
                                         Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(rows, cols);
                                         if (paths->empty()) return sum;
                                         detail::GraphAtS G(*graph, s);
                                         detail::FrlCache cache;
                                         for (const auto& p : *paths) sum += detail::path_contribution(G, p, cache, s);
                                         return sum;
                                       });
}

}  // namespace qnet
