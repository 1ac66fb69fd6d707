// Command-line harness: graph generation, end-to-end runs with verification,
// and step-count scaling benchmarks.
//
// Exit codes: 0 pass, 1 verification failure, 2 usage/parse error,
// 3 internal invariant violation. MESHMSF_LOG={off,phase,step} controls trace
// verbosity on stderr.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "meshmsf/runner.hpp"

using namespace meshmsf;

namespace {

std::vector<int> parse_sides(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoi(item));
  }
  if (out.empty()) throw ConfigError("empty side list");
  return out;
}

int log_level() {
  const char* env = std::getenv("MESHMSF_LOG");
  if (!env) return 0;
  std::string v = env;
  if (v == "phase") return 1;
  if (v == "step") return 2;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mesh-connected computer simulator: minimal spanning forests and "
               "connected components with honest step accounting"};
  app.require_subcommand(1);

  // --- gen -------------------------------------------------------------
  auto* gen_cmd = app.add_subcommand("gen", "generate a graph file");
  GenParams gp;
  std::string gen_out = "-";
  gen_cmd->add_option("--kind", gp.kind, "random-gnm | grid | tree | disjoint-union")->required();
  gen_cmd->add_option("--vertices", gp.vertices, "vertex count");
  gen_cmd->add_option("--edges", gp.edges, "edge count (random-gnm)");
  gen_cmd->add_option("--rows", gp.grid_rows, "grid rows");
  gen_cmd->add_option("--cols", gp.grid_cols, "grid cols");
  gen_cmd->add_option("--parts", gp.parts, "disjoint-union part count");
  gen_cmd->add_option("--part-vertices", gp.part_vertices, "vertices per part");
  gen_cmd->add_option("--part-edges", gp.part_edges, "edges per part");
  gen_cmd->add_option("--max-weight", gp.max_weight, "weights uniform in [0, max)");
  gen_cmd->add_option("--seed", gp.seed, "random seed");
  gen_cmd->add_option("--out", gen_out, "output path ('-' for stdout)");

  // --- run -------------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "run the pipeline on a graph file");
  std::string graph_path;
  ExperimentConfig cfg;
  int side_opt = 0;
  std::string format = "json";
  std::string verify_opt = "on";
  std::string backend_opt = "fast";
  run_cmd->add_option("--graph", graph_path, "edge list file")->required();
  run_cmd->add_option("--side", side_opt, "mesh side override (power of 2)");
  run_cmd->add_option("--rounds", cfg.rounds, "coarsening rounds per level");
  run_cmd->add_option("--seed", cfg.seed, "seed echoed into the report");
  run_cmd->add_option("--format", format, "json | csv");
  run_cmd->add_option("--verify", verify_opt, "on | off");
  run_cmd->add_option("--backend", backend_opt, "fast | micro");

  // --- bench -----------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "step-count scaling benchmark");
  std::string sides_text = "16,32,64";
  int trials = 1;
  std::uint64_t bench_seed = 1;
  bool prims = false;
  std::string bench_verify = "on";
  bench_cmd->add_option("--bench-sides", sides_text, "comma-separated ascending sides");
  bench_cmd->add_option("--trials", trials, "trials per side");
  bench_cmd->add_option("--seed", bench_seed, "base seed");
  bench_cmd->add_option("--verify", bench_verify, "on | off");
  bench_cmd->add_flag("--primitives", prims, "emit per-primitive step counts instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen_cmd) {
      Graph g = generate(gp);
      if (gen_out == "-")
        write_graph(std::cout, g);
      else
        write_graph_file(gen_out, g);
      return 0;
    }
    if (*run_cmd) {
      Graph g = read_graph_file(graph_path);
      if (side_opt > 0) cfg.side = side_opt;
      cfg.verify = verify_opt != "off";
      cfg.backend = backend_opt == "micro" ? Backend::Micro : Backend::Fast;
      if (log_level() >= 1)
        std::cerr << "run: vertices=" << g.n_vertices << " edges=" << g.edges.size()
                  << " side=" << cfg.side.value_or(auto_side(g)) << "\n";
      RunReport rep = run_experiment(g, cfg);
      if (format == "csv")
        std::cout << report_csv_header() << '\n' << report_csv_row(rep) << '\n';
      else
        std::cout << report_json(rep) << '\n';
      if (log_level() >= 1)
        std::cerr << "steps=" << rep.steps_total << " verdict=" << (rep.pass ? "pass" : "fail")
                  << "\n";
      return rep.pass ? 0 : 1;
    }
    if (*bench_cmd) {
      std::vector<int> sides = parse_sides(sides_text);
      if (prims) {
        bench_primitives(std::cout, sides);
        return 0;
      }
      ExperimentConfig base;
      base.verify = bench_verify != "off";
      BenchResult b = bench(sides, trials, bench_seed, base);
      write_bench_csv(std::cout, b);
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "internal contract violation: " << e.what() << "\n";
    return 3;
  } catch (const CapacityError& e) {
    std::cerr << "capacity violation: " << e.what() << "\n";
    return 3;
  } catch (const InternalError& e) {
    std::cerr << "internal invariant violation: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
