#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "meshmsf/mesh.hpp"
#include "meshmsf/words.hpp"

namespace meshmsf {

// ---------------------------------------------------------------------------
// Sorting and scanning passes.
//
// Every pass is expressed once as a schedule; the Micro backend executes the
// schedule round by round on the grid (odd-even transposition networks,
// neighbor-hop state sweeps) while the Fast backend applies the equivalent
// permutation or fold directly and advances the step counter by the same
// count. pass_cost() is the single source of truth for both.
// ---------------------------------------------------------------------------

// Placement after every sort: participating records in key order, then
// ballast, then nulls, two records per processor along the view's curve,
// slots 2 and 3 left empty.
enum class Tier : Word { Working = 0, Ballast = 1, Empty = 2 };

// Role of a record in the scan that follows a sort.
enum class ScanRole { None, Source, Receiver };

struct SortKeyOut {
  Tier tier = Tier::Empty;
  std::array<Word, 5> k{};  // within-tier key; must be total over distinct records
};

struct ScanValue {
  bool has = false;
  std::array<Word, 2> v{};  // lexicographic; smaller wins a segment
};

// Aggregate over one maximal run of equal segment keys (or a side of it).
struct RunView {
  bool any = false;            // run contains at least one record
  bool has_value = false;      // some Source contributed a value
  std::array<Word, 2> best{};  // minimum contributed value
  std::uint32_t sources = 0;   // number of Sources seen (saturates at 3)
};

struct PassSpec {
  // Number of leading key words that define a scan segment.
  int seg_words = 1;

  // Records placed per processor: 2 for working sets, 4 for co-sorts that
  // merge transient copies into saturated regions (the record_capacity
  // contract allows twice the resident capacity during merges).
  int density = 2;

  // Routing placement: empty slots order between the working records and the
  // ballast, so ballast packs into the staging slots of the view's curve tail
  // and the entry region holds only routed records. Requires density 2.
  bool tail_ballast = false;

  std::function<SortKeyOut(const Record&)> key;

  // Scan hooks; leave role unset for sort-only passes.
  std::function<ScanRole(const Record&)> role;
  std::function<ScanValue(const Record&)> value;
  // Called for every Working record with the run aggregates strictly before
  // and strictly after it (restricted to its own segment).
  std::function<void(Record&, const RunView& before, const RunView& after)> finalize;
};

// Steps charged by one sort or one scan over unit-sized blocks. All blocks of
// one unit size run in lockstep, so the cost is independent of how many
// blocks a view contains.
std::uint64_t sort_cost(int unit, int density = 2);
std::uint64_t scan_cost(int unit);

// Sort all records of every aligned unit x unit block of the view into the
// block's curve order under spec.key. unit == view.side sorts the whole view.
void sort_pass(MeshMachine& m, const SubmeshView& view, int unit, const PassSpec& spec);

// Forward+backward segmented sweep over each unit block. Input must be sorted
// under spec.key (adjacent segment-key inversions raise ContractError).
void scan_pass(MeshMachine& m, const SubmeshView& view, int unit, const PassSpec& spec);

// sort_pass followed by scan_pass.
void sorted_scan(MeshMachine& m, const SubmeshView& view, int unit, const PassSpec& spec);

// ---------------------------------------------------------------------------
// Local (zero-step) helpers. fn may rewrite the record in place; spawn hooks
// may emit one new record per existing record into the staging slots.
// ---------------------------------------------------------------------------
void local_pass(MeshMachine& m, const SubmeshView& view, const std::function<void(Record&)>& fn);

// For each non-null record r with free staging room, optionally produce one
// new record. The spawned record lands in slot 2 or 3 of the same processor.
void spawn_pass(MeshMachine& m, const SubmeshView& view,
                const std::function<bool(const Record&, Record&)>& make);

// Count records matching pred; charged as one counting sweep.
std::uint64_t count_pass(MeshMachine& m, const SubmeshView& view,
                         const std::function<bool(const Record&)>& pred);

// ---------------------------------------------------------------------------
// compact_route: flagged records move to the curve-entry prefix of the view
// (which the caller then treats as the target subview), unflagged records
// pack at the curve tail, nulls in between. The counting pass runs first and
// raises CapacityError if flagged records exceed the target's capacity
// (2 records per target processor). Returns the flagged count.
// ---------------------------------------------------------------------------
std::uint64_t compact_route(MeshMachine& m, const SubmeshView& view, const SubmeshView& target,
                            const std::function<bool(const Record&)>& flagged);

// Records of a view in curve order (gather helper for hosts and tests).
std::vector<Record> gather_records(const MeshMachine& m, const SubmeshView& view);

}  // namespace meshmsf
