#include "meshmsf/oracle.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <queue>

namespace meshmsf {

void Graph::validate() const {
  if (n_vertices == 0) throw ParseError("graph: vertex count must be positive");
  if (n_vertices >= kLabelLimit) throw ParseError("graph: too many vertices for the label width");
  if (edges.size() >= kSelfLoopIndex) throw ParseError("graph: too many edges for the index width");
  for (const GraphEdge& e : edges) {
    if (e.u >= n_vertices || e.v >= n_vertices) throw ParseError("graph: vertex index out of range");
    if (e.w >= kWeightLimit) throw ParseError("graph: weight out of range");
  }
}

bool edge_order_less(const GraphEdge& a, const GraphEdge& b) {
  auto key = [](const GraphEdge& e) {
    return std::make_tuple(e.w, std::min(e.u, e.v), std::max(e.u, e.v), e.index);
  };
  return key(a) < key(b);
}

UnionFind::UnionFind(std::size_t n) : parent_(n), rank_(n, 0), sets_(n) {
  for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
}

std::size_t UnionFind::find(std::size_t x) {
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

bool UnionFind::unite(std::size_t a, std::size_t b) {
  a = find(a);
  b = find(b);
  if (a == b) return false;
  if (rank_[a] < rank_[b]) std::swap(a, b);
  parent_[b] = a;
  if (rank_[a] == rank_[b]) ++rank_[a];
  --sets_;
  return true;
}

std::set<std::uint32_t> kruskal_msf(const Graph& g) {
  g.validate();
  std::vector<GraphEdge> order = g.edges;
  std::sort(order.begin(), order.end(), edge_order_less);
  UnionFind uf(g.n_vertices);
  std::set<std::uint32_t> picked;
  for (const GraphEdge& e : order) {
    if (e.u == e.v) continue;
    if (uf.unite(e.u, e.v)) picked.insert(e.index);
  }
  // Self-check: the result is acyclic and spans every component.
  UnionFind check(g.n_vertices);
  for (const GraphEdge& e : g.edges)
    if (picked.count(e.index) && !check.unite(e.u, e.v))
      throw InternalError("kruskal: selected edges contain a cycle");
  if (check.set_count() != uf.set_count())
    throw InternalError("kruskal: selected edges do not span");
  return picked;
}

std::vector<Word> cc_labels(const Graph& g) {
  g.validate();
  UnionFind uf(g.n_vertices);
  for (const GraphEdge& e : g.edges) uf.unite(e.u, e.v);
  std::vector<Word> min_label(g.n_vertices, kNullWord);
  for (Word v = 0; v < g.n_vertices; ++v) {
    std::size_t r = uf.find(v);
    min_label[r] = std::min(min_label[r], v);
  }
  std::vector<Word> out(g.n_vertices);
  for (Word v = 0; v < g.n_vertices; ++v) out[v] = min_label[uf.find(v)];
  return out;
}

std::uint64_t forest_weight(const Graph& g, const std::set<std::uint32_t>& edge_ids) {
  std::uint64_t total = 0;
  for (const GraphEdge& e : g.edges)
    if (edge_ids.count(e.index)) total += e.w;
  return total;
}

std::uint64_t prim_weight(const Graph& g) {
  // Prim from every unvisited vertex; adjacency built once.
  std::vector<std::vector<std::pair<Word, Word>>> adj(g.n_vertices);  // (peer, w)
  for (const GraphEdge& e : g.edges) {
    if (e.u == e.v) continue;
    adj[e.u].push_back({e.v, e.w});
    adj[e.v].push_back({e.u, e.w});
  }
  std::vector<char> done(g.n_vertices, 0);
  std::uint64_t total = 0;
  using Item = std::pair<std::uint64_t, Word>;  // (weight, vertex)
  for (Word s = 0; s < g.n_vertices; ++s) {
    if (done[s]) continue;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    pq.push({0, s});
    while (!pq.empty()) {
      auto [w, v] = pq.top();
      pq.pop();
      if (done[v]) continue;
      done[v] = 1;
      total += w;
      for (auto [peer, pw] : adj[v])
        if (!done[peer]) pq.push({pw, peer});
    }
  }
  return total;
}

namespace {

std::size_t component_count(const Graph& g) {
  UnionFind uf(g.n_vertices);
  for (const GraphEdge& e : g.edges) uf.unite(e.u, e.v);
  return uf.set_count();
}

void enumerate_forests(const Graph& g, std::size_t edge_pos, std::size_t needed, UnionFind uf,
                       std::uint64_t weight, std::uint64_t& best) {
  if (needed == 0) {
    best = std::min(best, weight);
    return;
  }
  if (edge_pos >= g.edges.size()) return;
  if (g.edges.size() - edge_pos < needed) return;
  // Exclude this edge.
  enumerate_forests(g, edge_pos + 1, needed, uf, weight, best);
  // Include it if it joins two sets.
  const GraphEdge& e = g.edges[edge_pos];
  if (e.u != e.v) {
    UnionFind with = uf;
    if (with.unite(e.u, e.v))
      enumerate_forests(g, edge_pos + 1, needed - 1, with, weight + e.w, best);
  }
}

}  // namespace

// Exhaustive minimum over all spanning forests; only for tiny instances.
std::uint64_t brute_force_msf_weight(const Graph& g) {
  if (g.edges.size() > 20) throw InternalError("brute force oracle: too many edges");
  std::size_t needed = g.n_vertices - component_count(g);
  std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
  enumerate_forests(g, 0, needed, UnionFind(g.n_vertices), 0, best);
  if (best == std::numeric_limits<std::uint64_t>::max())
    throw InternalError("brute force oracle: no spanning forest found");
  return best;
}

Verdict verify(const MsfOutput& result, const Graph& g) {
  Verdict v;
  std::set<std::uint32_t> truth = kruskal_msf(g);
  if (result.msf_origins != truth) {
    std::string missing, extra;
    for (std::uint32_t id : truth)
      if (!result.msf_origins.count(id)) missing += " " + std::to_string(id);
    for (std::uint32_t id : result.msf_origins)
      if (!truth.count(id)) extra += " " + std::to_string(id);
    v.pass = false;
    v.detail = "msf edge-id mismatch; missing:" + missing + " extra:" + extra;
    return v;
  }
  std::vector<Word> truth_labels = cc_labels(g);
  if (result.component_of.size() != g.n_vertices) {
    v.pass = false;
    v.detail = "component_of has wrong size";
    return v;
  }
  // Partition equality, invariant to label renaming.
  std::map<Word, Word> fwd, rev;
  for (Word x = 0; x < g.n_vertices; ++x) {
    Word a = result.component_of[x], b = truth_labels[x];
    auto [itf, newf] = fwd.try_emplace(a, b);
    auto [itr, newr] = rev.try_emplace(b, a);
    if ((!newf && itf->second != b) || (!newr && itr->second != a)) {
      v.pass = false;
      v.detail = "component partition differs at vertex " + std::to_string(x);
      return v;
    }
  }
  std::size_t comps = component_count(g);
  if (result.msf_origins.size() != g.n_vertices - comps) {
    v.pass = false;
    v.detail = "edge count " + std::to_string(result.msf_origins.size()) + " != vertices(" +
               std::to_string(g.n_vertices) + ") - components(" + std::to_string(comps) + ")";
    return v;
  }
  return v;
}

}  // namespace meshmsf
