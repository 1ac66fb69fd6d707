#include "meshmsf/primitives.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <tuple>

namespace meshmsf {

namespace {

int ilog2(int v) { return std::bit_width(static_cast<unsigned>(v)) - 1; }

// One scan state message on the wire; one half-packet (two records plus a
// header word) moved during curve placement.
constexpr int kStateWords = 11;
constexpr int kHalfPacketWords = 2 * kRecordWords + 1;

struct KeyedRec {
  Tier tier;
  std::array<Word, 5> k;
  Record rec;
};

bool key_less(const KeyedRec& a, const KeyedRec& b) {
  if (a.tier != b.tier) return a.tier < b.tier;
  return a.k < b.k;
}
bool key_eq(const KeyedRec& a, const KeyedRec& b) { return a.tier == b.tier && a.k == b.k; }

// ---------------------------------------------------------------------------
// Scan monoid: summary of a contiguous curve range of Working records.
// first/last describe the leading and trailing maximal segment runs.
// ---------------------------------------------------------------------------
using SegKey = std::array<Word, 3>;

void run_merge(RunView& into, const RunView& other) {
  if (!other.any) return;
  if (!into.any) {
    into = other;
    return;
  }
  if (other.has_value && (!into.has_value || other.best < into.best)) {
    into.best = other.best;
    into.has_value = true;
  }
  into.sources = std::min<std::uint32_t>(3, into.sources + other.sources);
}

struct RunState {
  bool any = false;
  bool sorted = true;
  bool single = false;
  SegKey kfirst{}, klast{};
  RunView first{}, last{};
};

RunState state_combine(const RunState& a, const RunState& b) {
  if (!a.any) return b;
  if (!b.any) return a;
  RunState r;
  r.any = true;
  bool joined = a.klast == b.kfirst;
  r.sorted = a.sorted && b.sorted && !(b.kfirst < a.klast);
  r.single = a.single && b.single && joined;
  r.kfirst = a.kfirst;
  r.klast = b.klast;
  r.first = a.first;
  if (a.single && joined) run_merge(r.first, b.first);
  r.last = b.last;
  if (b.single && joined) run_merge(r.last, a.last);
  return r;
}

SegKey seg_key_of(const PassSpec& spec, const SortKeyOut& ko) {
  SegKey s{};
  for (int i = 0; i < spec.seg_words; ++i) s[i] = ko.k[i];
  return s;
}

RunState state_of_record(const PassSpec& spec, const Record& rec, const SortKeyOut& ko) {
  RunState s;
  s.any = true;
  s.single = true;
  s.kfirst = s.klast = seg_key_of(spec, ko);
  RunView v;
  v.any = true;
  if (spec.role && spec.role(rec) == ScanRole::Source) {
    v.sources = 1;
    if (spec.value) {
      ScanValue sv = spec.value(rec);
      if (sv.has) {
        v.has_value = true;
        v.best = sv.v;
      }
    }
  }
  s.first = s.last = v;
  return s;
}

void for_each_block(const SubmeshView& view, int unit,
                    const std::function<void(const SubmeshView&, bool first)>& fn) {
  if (unit < 2 || unit > view.side || view.side % unit != 0)
    throw InternalError("pass: bad unit size");
  bool first = true;
  for (int r = view.row0; r < view.row0 + view.side; r += unit)
    for (int c = view.col0; c < view.col0 + view.side; c += unit) {
      fn(SubmeshView{r, c, unit, view.level}, first);
      first = false;
    }
}

// ---------------------------------------------------------------------------
// Step costs. The sort is a shearsort over cells holding up to four records
// (2*lg(u)+1 line phases of u odd-even rounds, one round exchanging four
// records each way) followed by the fixed snake-to-curve placement routed in
// three line permutation phases over half-packets (u external rounds each).
// Scans sweep forward and backward over the quadrant tree, nine transport
// slots per level each way.
// ---------------------------------------------------------------------------
std::uint64_t network_cost(int unit) {
  std::uint64_t phases = 2 * static_cast<std::uint64_t>(ilog2(unit)) + 1;
  return phases * unit * (kSlots * kRecordWords);
}
std::uint64_t conversion_cost(int unit, int density) {
  // Placement permutation routed in three line permutation phases; u external
  // rounds per phase, each moving one unit of `density` records plus a header.
  return 3ull * unit * (static_cast<std::uint64_t>(density) * kRecordWords + 1);
}
std::uint64_t transport_duration(int block_side) {
  return 2ull * block_side + (kStateWords - 1);
}

}  // namespace

std::uint64_t sort_cost(int unit, int density) {
  return network_cost(unit) + conversion_cost(unit, density);
}

std::uint64_t scan_cost(int unit) {
  std::uint64_t c = 0;
  for (int b = 2; b <= unit; b *= 2) c += 9 * transport_duration(b);
  return 2 * c;
}

namespace {

// --- fast sort ---------------------------------------------------------------

void fast_sort_block(MeshMachine& m, const SubmeshView& block, const PassSpec& spec) {
  std::vector<KeyedRec> keyed;
  std::uint64_t base = m.view_base(block);
  for (std::uint64_t r = 0; r < block.processors(); ++r) {
    int proc = m.proc_index(m.curve_cell(base + r));
    for (int s = 0; s < kSlots; ++s) {
      const Record& rec = m.rec(proc, s);
      if (rec.is_null()) continue;
      SortKeyOut ko = spec.key(rec);
      if (ko.tier == Tier::Empty) throw InternalError("sort: non-null record keyed Empty");
      keyed.push_back(KeyedRec{ko.tier, ko.k, rec});
    }
  }
  int density = spec.density;
  std::uint64_t limit = static_cast<std::uint64_t>(spec.tail_ballast ? kSlots : density) *
                        block.processors();
  if (keyed.size() > limit)
    throw InternalError("sort: block population of " + std::to_string(keyed.size()) +
                        " exceeds density " + std::to_string(density) + " on side " +
                        std::to_string(block.side));
  std::sort(keyed.begin(), keyed.end(), key_less);
  for (std::size_t i = 1; i < keyed.size(); ++i)
    if (key_eq(keyed[i - 1], keyed[i]) && !(keyed[i - 1].rec == keyed[i].rec)) {
      auto show = [](const KeyedRec& kr) {
        std::string t = "tier" + std::to_string((int)kr.tier) + " k=[";
        for (Word w : kr.k) t += std::to_string(w) + ",";
        t += "] f=[";
        for (Word w : kr.rec.f) t += std::to_string(w) + ",";
        t += "] aux=" + std::to_string(kr.rec.aux) + " meta=" + std::to_string(kr.rec.meta);
        return t;
      };
      throw InternalError("sort: key not total over distinct records: " + show(keyed[i - 1]) +
                          " vs " + show(keyed[i]));
    }
  std::uint64_t nproc = block.processors();
  if (!spec.tail_ballast) {
    std::size_t next = 0;
    for (std::uint64_t r = 0; r < nproc; ++r) {
      int proc = m.proc_index(m.curve_cell(base + r));
      for (int s = 0; s < kSlots; ++s)
        m.rec(proc, s) = (s < density && next < keyed.size()) ? keyed[next++].rec : null_record();
    }
    return;
  }
  // Routing placement: working records from the curve start in slots 0-1,
  // ballast into slots 2-3 of the curve tail, empty slots in between. This is
  // the same fixed snake-to-curve permutation with the empty slots ordered
  // between the two tiers.
  for (std::uint64_t r = 0; r < nproc; ++r) {
    int proc = m.proc_index(m.curve_cell(base + r));
    for (int s = 0; s < kSlots; ++s) m.rec(proc, s) = null_record();
  }
  std::size_t working = 0;
  while (working < keyed.size() && keyed[working].tier == Tier::Working) ++working;
  for (std::size_t i = 0; i < working; ++i) {
    int proc = m.proc_index(m.curve_cell(base + i / 2));
    m.rec(proc, static_cast<int>(i % 2)) = keyed[i].rec;
  }
  std::size_t nballast = keyed.size() - working;
  for (std::size_t i = 0; i < nballast; ++i) {
    // i-th ballast record (in key order) lands at overall tail offset.
    std::uint64_t tail = 2 * nproc - nballast + i;
    int proc = m.proc_index(m.curve_cell(base + tail / 2));
    m.rec(proc, 2 + static_cast<int>(tail % 2)) = keyed[working + i].rec;
  }
}

// --- micro sort: odd-even network -------------------------------------------

int snake_rank(int rr, int cc, int unit) { return rr * unit + (rr % 2 == 0 ? cc : unit - 1 - cc); }

struct Item {
  Word tier;
  std::array<Word, 5> k;
  Record rec;
};
bool item_less(const Item& a, const Item& b) {
  if (a.tier != b.tier) return a.tier < b.tier;
  return a.k < b.k;
}

void micro_network_block(MeshMachine& m, const SubmeshView& block, const PassSpec& spec,
                         bool charge) {
  int u = block.side;
  // For routing placement, empty slots participate as items ordered between
  // the working tier and the ballast tier; the fixed placement permutation
  // then sends ballast to the staging slots of the curve tail.
  Word null_tier = spec.tail_ballast ? Word{1} : Word{3};
  Word ballast_tier = spec.tail_ballast ? Word{2} : Word{1};
  auto tier_of = [&](Tier t) {
    return t == Tier::Working ? Word{0} : ballast_tier;
  };
  auto load_cell = [&](int rr, int cc, std::vector<Item>& out) {
    out.clear();
    int proc = m.proc_index(Cell{block.row0 + rr, block.col0 + cc});
    for (int s = 0; s < kSlots; ++s) {
      Record& rec = m.rec(proc, s);
      if (rec.is_null()) {
        if (spec.tail_ballast) out.push_back(Item{null_tier, {}, rec});
        continue;
      }
      SortKeyOut ko = spec.key(rec);
      if (ko.tier == Tier::Empty) throw InternalError("sort: non-null record keyed Empty");
      out.push_back(Item{tier_of(ko.tier), ko.k, rec});
    }
    std::sort(out.begin(), out.end(), item_less);
  };
  auto store_cell = [&](int rr, int cc, const std::vector<Item>& items, std::size_t from,
                        std::size_t to) {
    int proc = m.proc_index(Cell{block.row0 + rr, block.col0 + cc});
    for (int s = 0; s < kSlots; ++s)
      m.rec(proc, s) =
          (from + s < to) ? items[from + s].rec : null_record();
  };

  std::vector<Item> a, b, merged;
  auto exchange = [&](bool rows, int parity) {
    for (int line = 0; line < u; ++line) {
      bool asc = rows ? (line % 2 == 0) : true;
      for (int pos = parity; pos + 1 < u; pos += 2) {
        int r1 = rows ? line : pos, c1 = rows ? pos : line;
        int r2 = rows ? line : pos + 1, c2 = rows ? pos + 1 : line;
        load_cell(r1, c1, a);
        load_cell(r2, c2, b);
        merged.clear();
        std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(merged), item_less);
        std::size_t cut = std::min<std::size_t>(kSlots, merged.size());
        if (asc) {
          store_cell(r1, c1, merged, 0, cut);
          store_cell(r2, c2, merged, cut, merged.size());
        } else {
          store_cell(r2, c2, merged, 0, cut);
          store_cell(r1, c1, merged, cut, merged.size());
        }
      }
    }
  };

  int phases = 2 * ilog2(u) + 1;
  for (int p = 0; p < phases; ++p) {
    bool rows = (p % 2 == 0);
    for (int round = 0; round < u; ++round) {
      exchange(rows, round % 2);
      if (charge) m.advance(kSlots * kRecordWords);
    }
  }
}

// --- micro sort: snake-to-curve placement ------------------------------------
//
// After the network, records sit densely four per cell in block snake order.
// Half-packet h of snake cell q holds sorted ranks [4q+2h, 4q+2h+2) and must
// land at the block's curve cell (2q+h), slots 0-1 (half-packets beyond the
// cell count are empty and fold into slots 2-3). The fixed permutation is
// routed in three line permutation phases (columns, rows, columns); the
// intermediate positions come from an Euler-split edge coloring of the
// column-to-column transfer multigraph, cached per (unit, curve orientation).

struct ConversionPlan {
  int group = 2;                // records per routed unit (= placement density)
  std::vector<int> interm_pos;  // phase 1: position within source column
  std::vector<int> target_col;  // phase 2: destination column
  std::vector<int> final_pos;   // phase 3: position within target column
};

int curve_signature(const MeshMachine& m, const SubmeshView& block) {
  Cell e = m.view_cell(block, 0);
  Cell s = m.view_cell(block, 1);
  int corner = ((e.row - block.row0 == 0) ? 0 : 1) * 2 + ((e.col - block.col0 == 0) ? 0 : 1);
  int axis = (s.row != e.row) ? 0 : 1;
  return corner * 2 + axis;
}

// Proper edge coloring of a degree-regular bipartite multigraph whose degree
// is a power of two, by repeated Euler splits.
void euler_color(int nverts, int degree, const std::vector<std::pair<int, int>>& edges,
                 std::vector<int>& color, int color_base, const std::vector<int>& subset) {
  if (degree == 1) {
    for (int e : subset) color[e] = color_base;
    return;
  }
  int n2 = 2 * nverts;
  std::vector<std::vector<std::pair<int, int>>> adj(n2);
  for (int e : subset) {
    int l = edges[e].first, r = edges[e].second + nverts;
    adj[l].push_back({e, r});
    adj[r].push_back({e, l});
  }
  std::vector<char> used(edges.size(), 0);
  std::vector<int> ptr(n2, 0);
  std::vector<int> half_a, half_b;
  for (int start = 0; start < n2; ++start) {
    while (true) {
      while (ptr[start] < static_cast<int>(adj[start].size()) &&
             used[adj[start][ptr[start]].first])
        ++ptr[start];
      if (ptr[start] == static_cast<int>(adj[start].size())) break;
      int v = start;
      bool to_a = true;
      while (true) {
        while (ptr[v] < static_cast<int>(adj[v].size()) && used[adj[v][ptr[v]].first]) ++ptr[v];
        if (ptr[v] == static_cast<int>(adj[v].size())) break;
        auto [e, peer] = adj[v][ptr[v]];
        used[e] = 1;
        (to_a ? half_a : half_b).push_back(e);
        to_a = !to_a;
        v = peer;
      }
    }
  }
  euler_color(nverts, degree / 2, edges, color, color_base, half_a);
  euler_color(nverts, degree / 2, edges, color, color_base + degree / 2, half_b);
}

const ConversionPlan& conversion_plan(const MeshMachine& m, const SubmeshView& block,
                                      int density) {
  static std::map<std::tuple<int, int, int>, ConversionPlan> cache;
  int u = block.side;
  int sig = curve_signature(m, block);
  if (auto it = cache.find({u, sig, density}); it != cache.end()) return it->second;

  int ncells = u * u;
  int upc = kSlots / density;  // units per cell
  int nunits = upc * ncells;
  std::vector<int> snake_col(ncells);
  for (int rr = 0; rr < u; ++rr)
    for (int cc = 0; cc < u; ++cc) snake_col[snake_rank(rr, cc, u)] = cc;
  std::vector<int> curve_row(ncells), curve_col(ncells);
  for (int t = 0; t < ncells; ++t) {
    Cell c = m.view_cell(block, static_cast<std::uint64_t>(t));
    curve_row[t] = c.row - block.row0;
    curve_col[t] = c.col - block.col0;
  }

  // Unit m (in snake order) carries sorted ranks [density*m, density*(m+1))
  // and must land at curve cell (m mod ncells), slot group (m div ncells).
  ConversionPlan plan;
  plan.group = density;
  plan.interm_pos.assign(nunits, 0);
  plan.target_col.assign(nunits, 0);
  plan.final_pos.assign(nunits, 0);
  std::vector<std::pair<int, int>> edges(nunits);
  for (int q = 0; q < ncells; ++q)
    for (int h = 0; h < upc; ++h) {
      int id = upc * q + h;
      int tcell = id % ncells;
      int tgroup = id / ncells;
      edges[id] = {snake_col[q], curve_col[tcell]};
      plan.target_col[id] = curve_col[tcell];
      plan.final_pos[id] = upc * curve_row[tcell] + tgroup;
    }
  std::vector<int> color(nunits, -1);
  std::vector<int> all(nunits);
  for (int i = 0; i < nunits; ++i) all[i] = i;
  euler_color(u, upc * u, edges, color, 0, all);
  plan.interm_pos = color;

  auto [ins, ok] = cache.emplace(std::make_tuple(u, sig, density), std::move(plan));
  (void)ok;
  return ins->second;
}

void micro_convert_block(MeshMachine& m, const SubmeshView& block, int density, bool charge) {
  const ConversionPlan& plan = conversion_plan(m, block, density);
  int u = block.side;
  int ncells = u * u;
  int upc = kSlots / density;  // units per cell
  int nunits = upc * ncells;
  int npos = upc * u;  // unit positions along one line
  std::uint64_t unit_words = static_cast<std::uint64_t>(density) * kRecordWords + 1;

  std::vector<std::array<Record, kSlots>> unit_recs(nunits);
  std::vector<int> loc_col(nunits), loc_pos(nunits);  // column line, upc*row+h
  for (int rr = 0; rr < u; ++rr)
    for (int cc = 0; cc < u; ++cc) {
      int q = snake_rank(rr, cc, u);
      int proc = m.proc_index(Cell{block.row0 + rr, block.col0 + cc});
      for (int h = 0; h < upc; ++h) {
        int id = upc * q + h;
        for (int g = 0; g < density; ++g) unit_recs[id][g] = m.rec(proc, density * h + g);
        loc_col[id] = cc;
        loc_pos[id] = upc * rr + h;
      }
    }

  // Odd-even transposition of units within each line toward explicit target
  // positions. Swaps inside one cell are local; swaps across a cell boundary
  // cost one unit each way.
  auto permute = [&](const std::vector<int>& line_of, std::vector<int>& pos_of,
                     const std::vector<int>& want) {
    std::vector<int> ids(u * npos, -1);
    for (int id = 0; id < nunits; ++id) ids[line_of[id] * npos + pos_of[id]] = id;
    for (int round = 0; round < npos; ++round) {
      bool external = false;
      for (int line = 0; line < u; ++line)
        for (int p = round % 2; p + 1 < npos; p += 2) {
          if (p % upc == upc - 1) external = true;
          int s1 = line * npos + p, s2 = s1 + 1;
          int a = ids[s1], b = ids[s2];
          int ta = a < 0 ? (1 << 30) : want[a];
          int tb = b < 0 ? (1 << 30) : want[b];
          if (ta > tb) std::swap(ids[s1], ids[s2]);
        }
      if (external && charge) m.advance(unit_words);
    }
    for (int line = 0; line < u; ++line)
      for (int p = 0; p < npos; ++p) {
        int id = ids[line * npos + p];
        if (id >= 0) pos_of[id] = p;
      }
  };

  // Phase 1: within columns to intermediate positions.
  permute(loc_col, loc_pos, plan.interm_pos);
  // Phase 2: within rows to the target column (any slot group of it).
  std::vector<int> loc_row(nunits), row_pos(nunits), want_row(nunits);
  for (int id = 0; id < nunits; ++id) {
    loc_row[id] = loc_pos[id] / upc;
    row_pos[id] = upc * loc_col[id] + loc_pos[id] % upc;
    want_row[id] = upc * plan.target_col[id];
  }
  permute(loc_row, row_pos, want_row);
  for (int id = 0; id < nunits; ++id) {
    if (row_pos[id] / upc != plan.target_col[id])
      throw InternalError("conversion: phase 2 missed its target column");
    loc_col[id] = row_pos[id] / upc;
    loc_pos[id] = upc * loc_row[id] + row_pos[id] % upc;
  }
  // Phase 3: within columns to final positions.
  permute(loc_col, loc_pos, plan.final_pos);
  for (int id = 0; id < nunits; ++id)
    if (loc_pos[id] != plan.final_pos[id])
      throw InternalError("conversion: phase 3 missed its final position");

  for (int id = 0; id < nunits; ++id) {
    int rr = loc_pos[id] / upc, cc = loc_col[id], h = loc_pos[id] % upc;
    int proc = m.proc_index(Cell{block.row0 + rr, block.col0 + cc});
    for (int g = 0; g < density; ++g) m.rec(proc, density * h + g) = unit_recs[id][g];
  }
}

void micro_sort_block(MeshMachine& m, const SubmeshView& block, const PassSpec& spec,
                      bool charge) {
  micro_network_block(m, block, spec, charge);
  micro_convert_block(m, block, spec.density, charge);
  // Placement contract: key order along the placement sequence (slots 0-1 in
  // curve order, then slots 2-3), unused slots empty unless routing.
  std::uint64_t base = m.view_base(block);
  bool prev_set = false;
  KeyedRec prev{};
  for (int group = 0; group < 2; ++group) {
    for (std::uint64_t r = 0; r < block.processors(); ++r) {
      int proc = m.proc_index(m.curve_cell(base + r));
      for (int s = 2 * group; s < 2 * group + 2; ++s) {
        const Record& rec = m.rec(proc, s);
        if (s >= spec.density && !spec.tail_ballast) {
          if (!rec.is_null()) throw InternalError("sort: staging slot occupied after placement");
          continue;
        }
        if (rec.is_null()) continue;
        SortKeyOut ko = spec.key(rec);
        KeyedRec cur{ko.tier, ko.k, rec};
        if (prev_set && key_less(cur, prev) && !spec.tail_ballast)
          throw InternalError("sort: network misordered");
        if (prev_set && key_eq(prev, cur) && !(prev.rec == cur.rec))
          throw InternalError("sort: key not total over distinct records");
        prev = cur;
        prev_set = true;
      }
    }
  }
}

// --- scans -------------------------------------------------------------------

struct RecSlot {
  int proc;
  int slot;
  bool working;
  SegKey key;
  RunState unit;
};

void collect_scan_slots(MeshMachine& m, const SubmeshView& block, const PassSpec& spec,
                        std::vector<RecSlot>& out) {
  out.clear();
  std::uint64_t base = m.view_base(block);
  for (std::uint64_t r = 0; r < block.processors(); ++r) {
    int proc = m.proc_index(m.curve_cell(base + r));
    for (int s = 0; s < kSlots; ++s) {
      const Record& rec = m.rec(proc, s);
      RecSlot rs{proc, s, false, {}, {}};
      if (!rec.is_null()) {
        SortKeyOut ko = spec.key(rec);
        if (ko.tier == Tier::Working) {
          rs.working = true;
          rs.key = seg_key_of(spec, ko);
          rs.unit = state_of_record(spec, rec, ko);
        }
      }
      out.push_back(rs);
    }
  }
}

// Combine a range of slot states in quadrant-tree shape (what the mesh sweep
// computes); equals the linear fold by associativity of the monoid.
RunState tree_state(const std::vector<RecSlot>& slots, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return slots[lo].working ? slots[lo].unit : RunState{};
  std::size_t quarter = (hi - lo) / 4;
  if (quarter == 0) {
    std::size_t mid = lo + (hi - lo) / 2;
    return state_combine(tree_state(slots, lo, mid), tree_state(slots, mid, hi));
  }
  RunState acc = tree_state(slots, lo, lo + quarter);
  for (int j = 1; j < 4; ++j)
    acc = state_combine(acc, tree_state(slots, lo + j * quarter, lo + (j + 1) * quarter));
  return acc;
}

void apply_scan_block(MeshMachine& m, const SubmeshView& block, const PassSpec& spec,
                      bool tree_shape) {
  std::vector<RecSlot> slots;
  collect_scan_slots(m, block, spec, slots);
  std::size_t n = slots.size();
  if (n == 0) return;
  if (tree_shape) {
    RunState root = tree_state(slots, 0, n);
    if (!root.sorted) throw ContractError("scan: input not sorted by segment key");
  }
  std::vector<RunState> prefix(n), suffix(n);
  RunState acc;
  for (std::size_t i = 0; i < n; ++i) {
    prefix[i] = acc;
    if (slots[i].working) acc = state_combine(acc, slots[i].unit);
  }
  if (!acc.sorted) throw ContractError("scan: input not sorted by segment key");
  acc = RunState{};
  for (std::size_t i = n; i-- > 0;) {
    suffix[i] = acc;
    if (slots[i].working) acc = state_combine(slots[i].unit, acc);
  }
  if (!spec.finalize) return;
  for (std::size_t i = 0; i < n; ++i) {
    if (!slots[i].working) continue;
    RunView before{}, after{};
    if (prefix[i].any && prefix[i].klast == slots[i].key) before = prefix[i].last;
    if (suffix[i].any && suffix[i].kfirst == slots[i].key) after = suffix[i].first;
    spec.finalize(m.rec(slots[i].proc, slots[i].slot), before, after);
  }
}

}  // namespace

void sort_pass(MeshMachine& m, const SubmeshView& view, int unit, const PassSpec& spec) {
  bool fast = m.backend() == Backend::Fast;
  for_each_block(view, unit, [&](const SubmeshView& block, bool first) {
    if (fast)
      fast_sort_block(m, block, spec);
    else
      micro_sort_block(m, block, spec, /*charge=*/first);  // blocks run in lockstep
  });
  if (fast) m.advance(sort_cost(unit));
}

void scan_pass(MeshMachine& m, const SubmeshView& view, int unit, const PassSpec& spec) {
  bool tree = m.backend() == Backend::Micro;
  for_each_block(view, unit,
                 [&](const SubmeshView& block, bool) { apply_scan_block(m, block, spec, tree); });
  m.advance(scan_cost(unit));
}

void sorted_scan(MeshMachine& m, const SubmeshView& view, int unit, const PassSpec& spec) {
  sort_pass(m, view, unit, spec);
  scan_pass(m, view, unit, spec);
}

void local_pass(MeshMachine& m, const SubmeshView& view,
                const std::function<void(Record&)>& fn) {
  for (int r = view.row0; r < view.row0 + view.side; ++r)
    for (int c = view.col0; c < view.col0 + view.side; ++c) {
      int proc = m.proc_index(Cell{r, c});
      for (int s = 0; s < kSlots; ++s) {
        Record& rec = m.rec(proc, s);
        if (!rec.is_null()) fn(rec);
      }
    }
}

void spawn_pass(MeshMachine& m, const SubmeshView& view,
                const std::function<bool(const Record&, Record&)>& make) {
  std::vector<Record> fresh;
  for (int r = view.row0; r < view.row0 + view.side; ++r)
    for (int c = view.col0; c < view.col0 + view.side; ++c) {
      int proc = m.proc_index(Cell{r, c});
      fresh.clear();
      for (int s = 0; s < kSlots; ++s) {
        const Record& src = m.rec(proc, s);
        if (src.is_null()) continue;
        Record out;
        if (make(src, out)) fresh.push_back(out);
      }
      std::size_t next = 0;
      for (int s = 0; s < kSlots && next < fresh.size(); ++s)
        if (m.rec(proc, s).is_null()) m.rec(proc, s) = fresh[next++];
      if (next < fresh.size()) throw InternalError("spawn: no free slot on processor");
    }
}

std::uint64_t count_pass(MeshMachine& m, const SubmeshView& view,
                         const std::function<bool(const Record&)>& pred) {
  std::uint64_t n = 0;
  for (int r = view.row0; r < view.row0 + view.side; ++r)
    for (int c = view.col0; c < view.col0 + view.side; ++c) {
      int proc = m.proc_index(Cell{r, c});
      for (int s = 0; s < kSlots; ++s)
        if (!m.rec(proc, s).is_null() && pred(m.rec(proc, s))) ++n;
    }
  m.advance(scan_cost(view.side) / 2);
  return n;
}

std::uint64_t compact_route(MeshMachine& m, const SubmeshView& view, const SubmeshView& target,
                            const std::function<bool(const Record&)>& flagged) {
  std::uint64_t flags = count_pass(m, view, flagged);
  std::uint64_t cap = 2 * target.processors();
  if (flags > cap)
    throw CapacityError("compact_route: " + std::to_string(flags) + " flagged records exceed " +
                        std::to_string(cap) + " target slots");
  PassSpec spec;
  spec.tail_ballast = true;
  spec.key = [&flagged](const Record& rec) {
    SortKeyOut ko;
    ko.tier = flagged(rec) ? Tier::Working : Tier::Ballast;
    ko.k = {static_cast<Word>(rec.kind()), rec.f[3], rec.f[0], rec.f[1], rec.f[2]};
    return ko;
  };
  sort_pass(m, view, view.side, spec);
  return flags;
}

std::vector<Record> gather_records(const MeshMachine& m, const SubmeshView& view) {
  std::vector<Record> out;
  std::uint64_t base = m.view_base(view);
  for (std::uint64_t r = 0; r < view.processors(); ++r) {
    int proc = m.proc_index(m.curve_cell(base + r));
    for (int s = 0; s < kSlots; ++s)
      if (!m.rec(proc, s).is_null()) out.push_back(m.rec(proc, s));
  }
  return out;
}

}  // namespace meshmsf
