#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "meshmsf/graphgen.hpp"
#include "meshmsf/msf.hpp"

namespace meshmsf {

struct ExperimentConfig {
  std::optional<int> side;      // mesh side override
  int rounds = 6;               // coarsening rounds per level
  std::string sorter = "shearsort";
  std::uint64_t seed = 1;
  bool verify = true;
  Backend backend = Backend::Fast;
};

struct RunReport {
  int schema = 1;
  std::uint64_t n = 0;  // processors
  std::uint64_t records = 0;
  std::uint64_t vertices = 0;
  std::uint64_t msf_weight = 0;
  std::uint64_t components = 0;
  std::uint64_t steps_total = 0;
  std::map<std::string, std::uint64_t> steps_by_phase;
  bool verified = false;
  bool pass = false;
  std::string verdict_detail;
  ExperimentConfig config;
  MsfRun run;  // full result for library callers
};

RunReport run_experiment(const Graph& g, const ExperimentConfig& cfg);

std::string report_json(const RunReport& r);
std::string report_csv_header();
std::string report_csv_row(const RunReport& r);

struct BenchRow {
  int side = 0;
  std::uint64_t n = 0;
  int trial = 0;
  std::uint64_t total_steps = 0;
  std::map<std::string, std::uint64_t> by_phase;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  double slope = 0.0;  // fitted log-log slope of total steps vs n
};

// Dense random instances filling each mesh (V = n/4 vertices, edges filling
// the remaining processors), full pipeline runs with verification.
BenchResult bench(const std::vector<int>& sides, int trials, std::uint64_t seed,
                  const ExperimentConfig& base);

void write_bench_csv(std::ostream& os, const BenchResult& b);

// Per-primitive step counts: "primitive,side,steps" rows.
void bench_primitives(std::ostream& os, const std::vector<int>& sides);

}  // namespace meshmsf
