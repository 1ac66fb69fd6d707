#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "meshmsf/words.hpp"

namespace meshmsf {

struct GraphEdge {
  Word u = 0;
  Word v = 0;
  Word w = 0;
  std::uint32_t index = 0;  // position in the input edge list
};

struct Graph {
  Word n_vertices = 0;
  std::vector<GraphEdge> edges;

  void validate() const;  // throws ParseError on bad labels/weights
};

// The pinned total edge order: (weight, min endpoint, max endpoint, input
// index). Every tie anywhere in the pipeline and in the oracle is broken by
// this order, which makes the minimal spanning forest unique and lets results
// be compared as edge-ID sets.
bool edge_order_less(const GraphEdge& a, const GraphEdge& b);

class UnionFind {
 public:
  explicit UnionFind(std::size_t n);
  std::size_t find(std::size_t x);
  bool unite(std::size_t a, std::size_t b);  // false if already joined
  std::size_t set_count() const { return sets_; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::uint8_t> rank_;
  std::size_t sets_;
};

// Kruskal under the pinned order; self-loops are skipped. Returns the input
// indices of the forest edges.
std::set<std::uint32_t> kruskal_msf(const Graph& g);

// Component label per vertex; the representative is the minimum label in the
// component.
std::vector<Word> cc_labels(const Graph& g);

std::uint64_t forest_weight(const Graph& g, const std::set<std::uint32_t>& edge_ids);

// Independent cross-checks used by tests: Prim's total weight and the
// exhaustive minimum over all spanning forests (only for tiny graphs).
std::uint64_t prim_weight(const Graph& g);
std::uint64_t brute_force_msf_weight(const Graph& g);

struct Verdict {
  bool pass = true;
  std::string detail;  // first failing check, with a counterexample
};

struct MsfOutput {
  std::set<std::uint32_t> msf_origins;
  std::vector<Word> component_of;  // per original vertex
};

// Checks (1) edge-ID set equality with Kruskal, (2) partition equality of the
// component labeling (label names may differ), (3) the edge-count identity
// |msf| = vertices - components.
Verdict verify(const MsfOutput& result, const Graph& g);

}  // namespace meshmsf
