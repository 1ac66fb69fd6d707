#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "meshmsf/mesh.hpp"
#include "meshmsf/oracle.hpp"
#include "meshmsf/primitives.hpp"

namespace meshmsf {

// Record field conventions used by the pipeline:
//   Edge      f0=a f1=b f2=w f3=packed origin
//   SelfLoop  f0=f1=v (ingestion marker; absorbed at the first round)
//   Vertex    f0=v f1=ptr f2=min tree neighbor f3=scratch (quadrant stamp)
//   Copy      tree edge: f0=x f1=y   query: f0=key f1=answer f2=holder f3=ctx
//   Result    selected edge: f2=w f3=origin (endpoint fields go stale and are
//             rewritten from the origin when a combine re-activates them)

enum class CopyRole : Word { TreeEdge = 1, Query = 2, Marker = 3, Candidacy = 4 };

CopyRole copy_role(const Record& r);
void set_copy_role(Record& r, CopyRole role);
int foreign_depth(const Record& r);
void set_foreign_depth(Record& r, int depth);

struct RoundAudit {
  int view_side = 0;
  int round = 0;
  std::uint64_t unfinished_before = 0;  // labels holding at least one live edge
  std::uint64_t unfinished_after = 0;
};

struct LabelAudit {
  int view_side = 0;
  std::uint64_t live_vertices = 0;
  std::uint64_t subtrees_after = 0;  // post-adoption roots that keep neighbors
};

struct RouteAudit {
  std::uint64_t flagged = 0;
  std::uint64_t capacity = 0;
};

struct CallAudit {
  int view_side = 0;
  std::uint64_t labels_after_rounds = 0;  // vs side*side/64
};

struct PipelineAudit {
  std::vector<RoundAudit> rounds;
  std::vector<LabelAudit> labelings;
  std::vector<RouteAudit> routes;
  std::vector<CallAudit> calls;
};

struct LedgerLevel {
  int level = 0;
  std::vector<std::pair<Word, Word>> entries;  // child -> parent
};

struct MsfOptions {
  int rounds = 6;
};

struct MsfContext {
  MsfOptions opt;
  PipelineAudit audit;
  std::vector<LedgerLevel> ledger;
  int next_level_tag = 0;
  // Label translation chain: the per-round contraction maps along the current
  // recursion path, applied in order to an original vertex label.
  std::vector<std::unique_ptr<std::unordered_map<Word, Word>>> owned_maps;
  std::vector<const std::unordered_map<Word, Word>*> chain;

  Word translate(Word original) const;
};

// --- ingestion ---------------------------------------------------------------
// One record per processor in curve order: edges by input index, then one
// self-loop per vertex; remaining processors empty. Requires V + M <= side^2.
void ingest(MeshMachine& m, const Graph& g);

// Smallest legal mesh side for a graph (power of 2, records fit one per
// processor, and the labeling stage fits two records per processor).
int auto_side(const Graph& g);

// --- pipeline operations ------------------------------------------------------

// Marks the per-vertex minimum incident edge (pinned order: weight, then
// origin) of every live edge record with kFlagWinner. Returns the per-vertex
// winners (vertex label, edge origin) for oracle checks.
std::vector<std::pair<Word, Word>> select_min_incident(MeshMachine& m, const SubmeshView& view);

// Steps i-iv of tree labeling operate on Vertex records already present.
void build_directed_forest(MeshMachine& m, const SubmeshView& view);
void resolve_greatest_ancestors(MeshMachine& m, const SubmeshView& view);
void adopt_singletons(MeshMachine& m, const SubmeshView& view);

// Full tree labeling over the Copy(TreeEdge) records of the view. Synthesizes
// the vertex roster, runs steps i-v with the recursion, and leaves one Vertex
// record per roster label with the final tree root in f1. Returns the same
// map gathered to the host.
std::unordered_map<Word, Word> label_trees(MeshMachine& m, const SubmeshView& view,
                                           MsfContext& ctx, int depth);

// One coarsening round over the live edges of the view.
void coarsen(MeshMachine& m, const SubmeshView& view, MsfContext& ctx, int depth, int round);

// The recursive driver. Consumes every live edge of the view; selected edges
// remain as Result records flagged pending.
void msf(MeshMachine& m, const SubmeshView& view, MsfContext& ctx, int depth);

// Component labels for all original vertices from the Result records, via
// tree labeling over the selected edges. Labels for vertices absent from any
// selected edge default to the vertex itself.
std::vector<Word> connected_components(MeshMachine& m, const SubmeshView& view, MsfContext& ctx,
                                       Word n_vertices);

// Deepest-first composition of contraction levels (the standalone surface of
// the unwinding that label_trees performs internally). Levels are processed
// from the last to the first, rewriting each level's parents through the
// levels below; missing parents stay fixed (finished roots). Duplicate child
// labels within one level raise ContractError.
std::unordered_map<Word, Word> unwind_labels(MeshMachine& m, const SubmeshView& view,
                                             const std::vector<LedgerLevel>& levels);

struct MsfRun {
  MsfOutput output;
  std::uint64_t msf_weight = 0;
  std::uint64_t components = 0;
  StepReport steps;
  PipelineAudit audit;
  std::vector<LedgerLevel> ledger;
};

// ingest + msf + connected components + gather.
MsfRun run_pipeline(MeshMachine& m, const Graph& g, const MsfOptions& opt);

void dump_ledger(std::ostream& os, const std::vector<LedgerLevel>& ledger);

}  // namespace meshmsf
