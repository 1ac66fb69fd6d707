#include "meshmsf/mesh.hpp"

#include <algorithm>
#include <ostream>

namespace meshmsf {

void Outbound::send(Dir d, Word w) {
  auto& slot = out[static_cast<int>(d)];
  if (slot.has_value()) throw ContractError("sync_step: two words on one link");
  slot = w;
}

MeshMachine::MeshMachine(const MeshConfig& cfg) : cfg_(cfg), side_(cfg.side) {
  if (side_ < 2 || !is_power_of_two(static_cast<std::uint64_t>(side_)))
    throw ConfigError("mesh side must be a power of 2 and >= 2");
  if (cfg.record_capacity < 1) throw ConfigError("record_capacity must be positive");
  if (cfg.word_capacity < cfg.record_capacity * kRecordWords + 8)
    throw ConfigError("word_capacity too small for record_capacity plus scratch");
  std::uint64_t n = processor_count();
  records_.assign(n * kSlots, null_record());
  raw_regs_.assign(n, {});
  rank_of_.resize(n);
  cell_of_.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    Cell p = proc_cell(static_cast<int>(i));
    std::uint64_t r = hilbert_rank(p, side_);
    rank_of_[i] = r;
    cell_of_[r] = static_cast<int>(i);
  }
  phase_stack_.push_back("raw");
}

std::uint64_t MeshMachine::view_base(const SubmeshView& v) const {
  std::uint64_t area = v.processors();
  std::uint64_t r = curve_rank(Cell{v.row0, v.col0});
  return (r / area) * area;
}

SubmeshView MeshMachine::quadrant(const SubmeshView& v, int i) const {
  if (v.side < 2) throw ContractError("quadrant: view side must be >= 2");
  if (i < 0 || i > 3) throw ContractError("quadrant: index out of range");
  int h = v.side / 2;
  std::uint64_t base = view_base(v);
  std::uint64_t qarea = static_cast<std::uint64_t>(h) * h;
  Cell entry = curve_cell(base + static_cast<std::uint64_t>(i) * qarea);
  int r0 = v.row0 + ((entry.row - v.row0) / h) * h;
  int c0 = v.col0 + ((entry.col - v.col0) / h) * h;
  return SubmeshView{r0, c0, h, v.level + 1};
}

void MeshMachine::sync_step(const SubmeshView& view, const LocalRule& rule) {
  // Two-phase: all emits read the pre-step state, then all updates land.
  struct Pending {
    Inbound in;
  };
  std::vector<std::pair<int, Inbound>> inboxes;
  inboxes.reserve(view.processors());

  static constexpr int dr[4] = {-1, 0, 1, 0};
  static constexpr int dc[4] = {0, 1, 0, -1};

  std::vector<std::pair<int, Outbound>> sends;
  if (rule.emit) {
    for (int r = view.row0; r < view.row0 + view.side; ++r) {
      for (int c = view.col0; c < view.col0 + view.side; ++c) {
        Cell p{r, c};
        Outbound ob;
        rule.emit(p, std::span<const Word>(raw_regs_[proc_index(p)]), ob);
        sends.emplace_back(proc_index(p), ob);
      }
    }
  }

  // Deliver: direction d from p arrives at neighbor as the opposite side.
  std::vector<Inbound> inbox(processor_count());
  for (auto& [src, ob] : sends) {
    Cell p = proc_cell(src);
    for (int d = 0; d < 4; ++d) {
      if (!ob.out[d].has_value()) continue;
      Cell q{p.row + dr[d], p.col + dc[d]};
      if (!view.contains(q))
        throw ContractError("sync_step: send across the view boundary");
      inbox[proc_index(q)].from[(d + 2) % 4] = ob.out[d];
      if (cfg_.track_transfers) log_transfer(src, proc_index(q));
    }
  }

  auto update_one = [&](Cell p) {
    int idx = proc_index(p);
    if (rule.update) rule.update(p, raw_regs_[idx], inbox[idx]);
    if (raw_regs_[idx].size() > static_cast<std::size_t>(cfg_.word_capacity))
      throw CapacityError("sync_step: register count exceeds word_capacity");
  };
  if (!cfg_.reverse_update_order) {
    for (int r = view.row0; r < view.row0 + view.side; ++r)
      for (int c = view.col0; c < view.col0 + view.side; ++c) update_one(Cell{r, c});
  } else {
    for (int r = view.row0 + view.side - 1; r >= view.row0; --r)
      for (int c = view.col0 + view.side - 1; c >= view.col0; --c) update_one(Cell{r, c});
  }
  advance(1);
}

void MeshMachine::advance(std::uint64_t steps) {
  if (steps == 0) return;
  report_.total_steps += steps;
  report_.per_phase[phase_stack_.back()] += steps;
}

void MeshMachine::push_phase(const std::string& tag) { phase_stack_.push_back(tag); }

void MeshMachine::pop_phase() {
  if (phase_stack_.size() <= 1) throw InternalError("pop_phase: empty phase stack");
  phase_stack_.pop_back();
}

const std::string& MeshMachine::current_phase() const { return phase_stack_.back(); }

void MeshMachine::parallel_max(const std::vector<std::function<void()>>& branches) {
  StepReport before = report_;
  std::map<std::string, std::uint64_t> max_delta;
  for (const auto& fn : branches) {
    report_ = before;
    fn();
    for (const auto& [tag, count] : report_.per_phase) {
      std::uint64_t base = 0;
      if (auto it = before.per_phase.find(tag); it != before.per_phase.end()) base = it->second;
      std::uint64_t delta = count - base;
      if (delta > 0) max_delta[tag] = std::max(max_delta[tag], delta);
    }
  }
  report_ = before;
  for (const auto& [tag, delta] : max_delta) {
    report_.per_phase[tag] += delta;
    report_.total_steps += delta;
  }
}

void MeshMachine::log_transfer(int from, int to) {
  transfer_log_.push_back(Transfer{report_.total_steps, from, to});
}

void MeshMachine::dump(std::ostream& os) const {
  for (int r = 0; r < side_; ++r) {
    for (int c = 0; c < side_; ++c) {
      int idx = r * side_ + c;
      os << r << ' ' << c << ':';
      const auto& regs = raw_regs_[idx];
      if (!regs.empty()) {
        for (std::size_t i = 0; i < regs.size(); ++i) os << (i ? "," : " ") << regs[i];
      } else {
        bool first = true;
        for (int s = 0; s < kSlots; ++s) {
          const Record& rec = records_[idx * kSlots + s];
          if (rec.is_null()) continue;
          for (Word w : {rec.f[0], rec.f[1], rec.f[2], rec.f[3], rec.aux, rec.meta}) {
            os << (first ? " " : ",") << w;
            first = false;
          }
        }
      }
      os << '\n';
    }
  }
}

}  // namespace meshmsf
