#include "meshmsf/graphgen.hpp"

#include <fstream>
#include <random>
#include <sstream>

namespace meshmsf {

Graph read_graph(std::istream& in) {
  Graph g;
  std::string line;
  bool have_header = false;
  std::uint64_t expect = 0;
  while (std::getline(in, line)) {
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    if (!have_header) {
      Word v, m;
      if (!(ls >> v >> m)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        throw ParseError("graph file: bad header line");
      }
      g.n_vertices = v;
      expect = m;
      have_header = true;
      continue;
    }
    Word u, v, w;
    if (!(ls >> u >> v >> w)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ParseError("graph file: bad edge line: " + line);
    }
    g.edges.push_back(GraphEdge{u, v, w, static_cast<std::uint32_t>(g.edges.size())});
  }
  if (!have_header) throw ParseError("graph file: missing header");
  if (g.edges.size() != expect)
    throw ParseError("graph file: header promises " + std::to_string(expect) + " edges, found " +
                     std::to_string(g.edges.size()));
  g.validate();
  return g;
}

Graph read_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open graph file: " + path);
  return read_graph(in);
}

void write_graph(std::ostream& out, const Graph& g) {
  out << g.n_vertices << ' ' << g.edges.size() << '\n';
  for (const GraphEdge& e : g.edges) out << e.u << ' ' << e.v << ' ' << e.w << '\n';
}

void write_graph_file(const std::string& path, const Graph& g) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open output file: " + path);
  write_graph(out, g);
}

namespace {

Word rand_weight(std::mt19937_64& rng, Word max_weight) {
  return std::uniform_int_distribution<Word>(0, max_weight - 1)(rng);
}

Graph gen_gnm(std::uint64_t n, std::uint64_t m, Word max_w, std::mt19937_64& rng) {
  Graph g;
  g.n_vertices = n;
  std::uniform_int_distribution<Word> pick(0, n - 1);
  for (std::uint64_t i = 0; i < m; ++i) {
    Word u = pick(rng), v = pick(rng);
    g.edges.push_back(
        GraphEdge{u, v, rand_weight(rng, max_w), static_cast<std::uint32_t>(g.edges.size())});
  }
  return g;
}

Graph gen_tree(std::uint64_t n, Word max_w, std::mt19937_64& rng) {
  Graph g;
  g.n_vertices = n;
  for (std::uint64_t v = 1; v < n; ++v) {
    std::uniform_int_distribution<Word> pick(0, v - 1);
    g.edges.push_back(GraphEdge{pick(rng), static_cast<Word>(v), rand_weight(rng, max_w),
                                static_cast<std::uint32_t>(g.edges.size())});
  }
  return g;
}

Graph gen_grid(std::uint64_t rows, std::uint64_t cols, Word max_w, std::mt19937_64& rng) {
  Graph g;
  g.n_vertices = rows * cols;
  auto id = [&](std::uint64_t r, std::uint64_t c) { return static_cast<Word>(r * cols + c); };
  for (std::uint64_t r = 0; r < rows; ++r)
    for (std::uint64_t c = 0; c < cols; ++c) {
      if (c + 1 < cols)
        g.edges.push_back(GraphEdge{id(r, c), id(r, c + 1), rand_weight(rng, max_w),
                                    static_cast<std::uint32_t>(g.edges.size())});
      if (r + 1 < rows)
        g.edges.push_back(GraphEdge{id(r, c), id(r + 1, c), rand_weight(rng, max_w),
                                    static_cast<std::uint32_t>(g.edges.size())});
    }
  return g;
}

}  // namespace

Graph generate(const GenParams& p) {
  std::mt19937_64 rng(p.seed);
  Graph g;
  if (p.kind == "random-gnm") {
    if (p.vertices == 0) throw ParseError("random-gnm: vertices must be positive");
    g = gen_gnm(p.vertices, p.edges, p.max_weight, rng);
  } else if (p.kind == "tree") {
    if (p.vertices == 0) throw ParseError("tree: vertices must be positive");
    g = gen_tree(p.vertices, p.max_weight, rng);
  } else if (p.kind == "grid") {
    std::uint64_t rows = p.grid_rows, cols = p.grid_cols;
    if (rows == 0 && cols == 0 && p.vertices > 0) {
      // Square lattice over ~vertices cells.
      rows = cols = 1;
      while ((rows + 1) * (rows + 1) <= p.vertices) ++rows;
      cols = rows;
    }
    if (rows == 0 || cols == 0) throw ParseError("grid: rows and cols must be positive");
    g = gen_grid(rows, cols, p.max_weight, rng);
  } else if (p.kind == "disjoint-union") {
    if (p.parts == 0 || p.part_vertices == 0)
      throw ParseError("disjoint-union: parts and part-vertices must be positive");
    g.n_vertices = p.parts * p.part_vertices;
    for (std::uint64_t k = 0; k < p.parts; ++k) {
      Graph part = gen_gnm(p.part_vertices, p.part_edges, p.max_weight, rng);
      Word off = static_cast<Word>(k * p.part_vertices);
      for (GraphEdge e : part.edges)
        g.edges.push_back(
            GraphEdge{e.u + off, e.v + off, e.w, static_cast<std::uint32_t>(g.edges.size())});
    }
  } else {
    throw ParseError("unknown generator kind: " + p.kind);
  }
  g.validate();
  return g;
}

}  // namespace meshmsf
