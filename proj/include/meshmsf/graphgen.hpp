#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "meshmsf/oracle.hpp"

namespace meshmsf {

// Edge-list file format: first line "V M", then M lines "u v w" in decimal.
// Lines starting with '#' are comments.
Graph read_graph(std::istream& in);
Graph read_graph_file(const std::string& path);
void write_graph(std::ostream& out, const Graph& g);
void write_graph_file(const std::string& path, const Graph& g);

struct GenParams {
  std::string kind;            // random-gnm | grid | tree | disjoint-union
  std::uint64_t vertices = 0;  // random-gnm, tree
  std::uint64_t edges = 0;     // random-gnm
  std::uint64_t grid_rows = 0, grid_cols = 0;
  std::uint64_t parts = 0, part_vertices = 0, part_edges = 0;  // disjoint-union of gnm parts
  Word max_weight = Word{1} << 20;                             // weights uniform in [0, max_weight)
  std::uint64_t seed = 1;
};

// Deterministic in all params including seed.
Graph generate(const GenParams& p);

}  // namespace meshmsf
