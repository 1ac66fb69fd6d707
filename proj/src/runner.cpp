#include "meshmsf/runner.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace meshmsf {

RunReport run_experiment(const Graph& g, const ExperimentConfig& cfg) {
  g.validate();
  int side = cfg.side.value_or(auto_side(g));
  if (!is_power_of_two(static_cast<std::uint64_t>(side)) || side < 2)
    throw ConfigError("side must be a power of 2 and >= 2");
  if (side < auto_side(g))
    throw ConfigError("side " + std::to_string(side) + " too small; need at least " +
                      std::to_string(auto_side(g)));
  if (cfg.sorter != "shearsort") throw ConfigError("unknown sorter: " + cfg.sorter);

  MeshConfig mc;
  mc.side = side;
  mc.backend = cfg.backend;
  MeshMachine m(mc);
  MsfOptions opt;
  opt.rounds = cfg.rounds;

  RunReport rep;
  rep.config = cfg;
  rep.run = run_pipeline(m, g, opt);
  rep.n = m.processor_count();
  rep.records = g.n_vertices + g.edges.size();
  rep.vertices = g.n_vertices;
  rep.msf_weight = rep.run.msf_weight;
  rep.components = rep.run.components;
  rep.steps_total = rep.run.steps.total_steps;
  rep.steps_by_phase = rep.run.steps.per_phase;
  if (cfg.verify) {
    rep.verified = true;
    Verdict v = verify(rep.run.output, g);
    rep.pass = v.pass;
    rep.verdict_detail = v.detail;
  } else {
    rep.pass = true;
  }
  return rep;
}

std::string report_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["schema"] = r.schema;
  j["n"] = r.n;
  j["records"] = r.records;
  j["vertices"] = r.vertices;
  j["msf_weight"] = r.msf_weight;
  j["components"] = r.components;
  j["steps_total"] = r.steps_total;
  nlohmann::ordered_json phases = nlohmann::ordered_json::object();
  for (const auto& [tag, count] : r.steps_by_phase) phases[tag] = count;
  j["steps_by_phase"] = phases;
  j["verdict"] = r.verified ? (r.pass ? "pass" : "fail") : "unverified";
  if (!r.verdict_detail.empty()) j["verdict_detail"] = r.verdict_detail;
  nlohmann::ordered_json echo;
  echo["side"] = r.config.side.value_or(0);
  echo["rounds"] = r.config.rounds;
  echo["sorter"] = r.config.sorter;
  echo["seed"] = r.config.seed;
  echo["verify"] = r.config.verify;
  echo["backend"] = r.config.backend == Backend::Fast ? "fast" : "micro";
  j["config_echo"] = echo;
  return j.dump(2);
}

std::string report_csv_header() {
  return "n,records,vertices,msf_weight,components,steps_total,verdict";
}

std::string report_csv_row(const RunReport& r) {
  std::ostringstream os;
  os << r.n << ',' << r.records << ',' << r.vertices << ',' << r.msf_weight << ','
     << r.components << ',' << r.steps_total << ','
     << (r.verified ? (r.pass ? "pass" : "fail") : "unverified");
  return os.str();
}

BenchResult bench(const std::vector<int>& sides, int trials, std::uint64_t seed,
                  const ExperimentConfig& base) {
  BenchResult out;
  for (std::size_t i = 1; i < sides.size(); ++i)
    if (sides[i] <= sides[i - 1]) throw ConfigError("bench sides must be ascending");
  for (int side : sides) {
    if (!is_power_of_two(static_cast<std::uint64_t>(side)) || side < 8)
      throw ConfigError("bench sides must be powers of 2 and >= 8");
    std::uint64_t n = static_cast<std::uint64_t>(side) * side;
    for (int t = 0; t < trials; ++t) {
      // Dense instances filling the mesh: a fixed vertex budget with every
      // remaining processor holding one random edge, so the measured work
      // tracks the mesh machinery rather than the instance shape.
      GenParams gp;
      gp.kind = "random-gnm";
      gp.vertices = std::min<std::uint64_t>(128, n / 2);
      gp.edges = n - gp.vertices;
      gp.seed = seed + 1000003ull * t + 17ull * side;
      Graph g = generate(gp);
      ExperimentConfig cfg = base;
      cfg.side = side;
      cfg.seed = gp.seed;
      RunReport rep = run_experiment(g, cfg);
      if (cfg.verify && !rep.pass)
        throw InternalError("bench: verification failed at side " + std::to_string(side) + ": " +
                            rep.verdict_detail);
      BenchRow row;
      row.side = side;
      row.n = n;
      row.trial = t;
      row.total_steps = rep.steps_total;
      row.by_phase = rep.steps_by_phase;
      out.rows.push_back(std::move(row));
    }
  }
  // Least-squares slope of log(total_steps) against log(n).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  double k = 0;
  for (const BenchRow& row : out.rows) {
    double x = std::log(static_cast<double>(row.n));
    double y = std::log(static_cast<double>(row.total_steps));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    k += 1;
  }
  if (k >= 2 && k * sxx - sx * sx != 0) out.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  return out;
}

void write_bench_csv(std::ostream& os, const BenchResult& b) {
  std::vector<std::string> tags;
  for (const BenchRow& row : b.rows)
    for (const auto& [tag, count] : row.by_phase) {
      (void)count;
      if (std::find(tags.begin(), tags.end(), tag) == tags.end()) tags.push_back(tag);
    }
  std::sort(tags.begin(), tags.end());
  os << "side,n,trial,total_steps";
  for (const std::string& t : tags) os << ",steps_" << t;
  os << '\n';
  for (const BenchRow& row : b.rows) {
    os << row.side << ',' << row.n << ',' << row.trial << ',' << row.total_steps;
    for (const std::string& t : tags) {
      auto it = row.by_phase.find(t);
      os << ',' << (it == row.by_phase.end() ? 0 : it->second);
    }
    os << '\n';
  }
  os << "# slope " << b.slope << '\n';
}

void bench_primitives(std::ostream& os, const std::vector<int>& sides) {
  os << "primitive,side,steps\n";
  for (int side : sides) {
    os << "sort," << side << ',' << sort_cost(side) << '\n';
    os << "scan," << side << ',' << scan_cost(side) << '\n';
    os << "lookup," << side << ',' << 2 * (sort_cost(side) + scan_cost(side)) << '\n';
    os << "route," << side << ',' << sort_cost(side) + scan_cost(side) / 2 << '\n';
  }
}

}  // namespace meshmsf
