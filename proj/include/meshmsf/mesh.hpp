#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meshmsf/hilbert.hpp"
#include "meshmsf/words.hpp"

namespace meshmsf {

// Execution backend.
//
// Micro simulates every synchronous step: one word per link per step, data
// moving only between 4-neighbors, the step counter incremented once per
// simulated step. Fast applies each primitive's effect functionally and
// advances the counter by the exact step cost of the micro schedule (the two
// backends share one cost computation and are cross-checked for bit-identical
// states and counts in the test suite). Micro is the authority; Fast makes
// large meshes tractable.
enum class Backend { Micro, Fast };

struct MeshConfig {
  int side = 2;
  int word_capacity = 64;
  int record_capacity = 2;
  Backend backend = Backend::Fast;
  bool track_transfers = false;        // log (step, from, to) per moved word
  bool reverse_update_order = false;   // iterate processors in reverse (must not matter)
};

// An axis-aligned sub-square of the root mesh. Views arising from the
// recursion are always curve-aligned: origin a multiple of side, side a power
// of 2, so the root Hilbert curve restricted to the view is one contiguous
// rank range.
struct SubmeshView {
  int row0 = 0;
  int col0 = 0;
  int side = 0;
  int level = 0;  // recursion depth tag, informational

  bool contains(Cell p) const {
    return p.row >= row0 && p.row < row0 + side && p.col >= col0 && p.col < col0 + side;
  }
  std::uint64_t processors() const {
    return static_cast<std::uint64_t>(side) * static_cast<std::uint64_t>(side);
  }
  bool operator==(const SubmeshView&) const = default;
};

struct StepReport {
  std::uint64_t total_steps = 0;
  std::map<std::string, std::uint64_t> per_phase;

  std::uint64_t phase(const std::string& tag) const {
    auto it = per_phase.find(tag);
    return it == per_phase.end() ? 0 : it->second;
  }
};

// Directions for the raw rule interface, clockwise from north.
enum class Dir : int { North = 0, East = 1, South = 2, West = 3 };

struct Inbound {
  std::array<std::optional<Word>, 4> from{};
  const std::optional<Word>& operator[](Dir d) const { return from[static_cast<int>(d)]; }
};

class Outbound {
 public:
  void send(Dir d, Word w);
  friend class MeshMachine;

 private:
  std::array<std::optional<Word>, 4> out{};
};

// A per-processor local rule for one synchronous step. emit reads the
// pre-step registers and may send at most one word per link; update rewrites
// the registers from the pre-step values plus the inbound words. All
// processors update as if simultaneously.
struct LocalRule {
  std::function<void(Cell, std::span<const Word>, Outbound&)> emit;
  std::function<void(Cell, std::vector<Word>&, const Inbound&)> update;
};

struct Transfer {
  std::uint64_t step;
  int from_proc;
  int to_proc;
};

// Number of physical record slots per processor. Slots 0-1 hold the placed
// working set; slots 2-3 are transient staging for co-sorted copies. The
// record_capacity contract (2 persistent, 4 transient) is asserted at phase
// boundaries.
inline constexpr int kSlots = 4;

class MeshMachine {
 public:
  explicit MeshMachine(const MeshConfig& cfg);

  int side() const { return side_; }
  std::uint64_t processor_count() const { return static_cast<std::uint64_t>(side_) * side_; }
  const MeshConfig& config() const { return cfg_; }
  Backend backend() const { return cfg_.backend; }
  SubmeshView root_view() const { return SubmeshView{0, 0, side_, 0}; }

  // --- curve geometry -------------------------------------------------
  int proc_index(Cell p) const { return p.row * side_ + p.col; }
  Cell proc_cell(int idx) const { return Cell{idx / side_, idx % side_}; }

  // Global curve rank of a cell and its inverse.
  std::uint64_t curve_rank(Cell p) const { return rank_of_[proc_index(p)]; }
  Cell curve_cell(std::uint64_t r) const { return proc_cell(cell_of_[r]); }

  // Rank range of an aligned view on the global curve.
  std::uint64_t view_base(const SubmeshView& v) const;
  std::uint64_t view_rank(const SubmeshView& v, Cell p) const { return curve_rank(p) - view_base(v); }
  Cell view_cell(const SubmeshView& v, std::uint64_t r) const { return curve_cell(view_base(v) + r); }

  // Quadrant i (0..3) of a view in curve order: the four quadrants partition
  // the view and quadrant i holds the i-th quarter of its curve rank range.
  SubmeshView quadrant(const SubmeshView& v, int i) const;

  // --- record slots (primitive layer) ----------------------------------
  Record& rec(int proc, int slot) { return records_[proc * kSlots + slot]; }
  const Record& rec(int proc, int slot) const { return records_[proc * kSlots + slot]; }
  Record& rec(Cell p, int slot) { return rec(proc_index(p), slot); }
  const Record& rec(Cell p, int slot) const { return rec(proc_index(p), slot); }

  // --- raw synchronous step (rule layer) --------------------------------
  // The one public operation that moves data between processors. Registers
  // are a per-processor word sequence, bounded by word_capacity after every
  // step. Links crossing the view boundary carry nothing.
  void sync_step(const SubmeshView& view, const LocalRule& rule);

  std::vector<Word>& registers(Cell p) { return raw_regs_[proc_index(p)]; }
  const std::vector<Word>& registers(Cell p) const { return raw_regs_[proc_index(p)]; }

  // --- step accounting ---------------------------------------------------
  // advance(1) is invoked once per simulated synchronous step by the micro
  // backend; the fast backend charges whole schedules at once.
  void advance(std::uint64_t steps);
  const StepReport& report() const { return report_; }
  std::uint64_t total_steps() const { return report_.total_steps; }

  void push_phase(const std::string& tag);
  void pop_phase();
  const std::string& current_phase() const;

  // Runs branches sequentially over disjoint views that are logically
  // concurrent; the counter advances by the per-phase maximum over branches
  // rather than the sum.
  void parallel_max(const std::vector<std::function<void()>>& branches);

  const std::vector<Transfer>& transfers() const { return transfer_log_; }
  void clear_transfers() { transfer_log_.clear(); }
  void log_transfer(int from, int to);

  // Debug dump, one line per processor: "row col: word,word,...".
  void dump(std::ostream& os) const;

 private:
  MeshConfig cfg_;
  int side_;
  std::vector<Record> records_;
  std::vector<std::vector<Word>> raw_regs_;
  std::vector<std::uint64_t> rank_of_;  // proc index -> global curve rank
  std::vector<int> cell_of_;            // global curve rank -> proc index
  StepReport report_;
  std::vector<std::string> phase_stack_;
  std::vector<Transfer> transfer_log_;
};

}  // namespace meshmsf
