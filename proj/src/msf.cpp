#include "meshmsf/msf.hpp"

#include <algorithm>
#include <ostream>

namespace meshmsf {

namespace {

constexpr Word kRoleShift = 20;
constexpr Word kRoleMask = Word{0xf} << kRoleShift;
constexpr Word kDepthShift = 32;
constexpr Word kDepthMask = Word{0xff} << kDepthShift;

Word kindrank(const Record& r) {
  return static_cast<Word>(r.kind()) | (static_cast<Word>(foreign_depth(r)) << 8);
}

// Any non-null record not participating in the current pass sorts behind the
// working records under a content key (unique by the pipeline's invariants).
SortKeyOut ballast_key(const Record& r) {
  SortKeyOut ko;
  ko.tier = Tier::Ballast;
  ko.k = {kindrank(r), r.f[3], r.f[0], r.f[1], r.f[2]};
  return ko;
}

bool live(const Record& r) { return foreign_depth(r) == 0; }
bool live_edge(const Record& r) { return r.kind() == Kind::Edge && live(r); }
bool live_vertex(const Record& r) { return r.kind() == Kind::Vertex && live(r); }
bool is_copy(const Record& r, CopyRole role) {
  return r.kind() == Kind::Copy && copy_role(r) == role;
}
bool live_copy(const Record& r, CopyRole role) { return is_copy(r, role) && live(r); }

struct PhaseScope {
  MeshMachine& m;
  PhaseScope(MeshMachine& mm, const std::string& tag) : m(mm) { m.push_phase(tag); }
  ~PhaseScope() { m.pop_phase(); }
};

// Distinct labels appearing in live edge records (host inspection, uncharged;
// used by the audit and the driver's bookkeeping).
std::uint64_t count_edge_labels(MeshMachine& m, const SubmeshView& view) {
  std::set<Word> labels;
  local_pass(m, view, [&](Record& r) {
    if (live_edge(r) && r.f[0] != r.f[1]) {
      labels.insert(r.f[0]);
      labels.insert(r.f[1]);
    }
  });
  return labels.size();
}

std::uint64_t host_count(MeshMachine& m, const SubmeshView& view,
                         const std::function<bool(const Record&)>& pred) {
  std::uint64_t n = 0;
  local_pass(m, view, [&](Record& r) {
    if (pred(r)) ++n;
  });
  return n;
}

// Repack everything at two records per processor (spawn passes need free
// staging slots after a merge left the region at transient density).
void repack(MeshMachine& m, const SubmeshView& view) {
  PassSpec spec;
  spec.key = [](const Record& r) { return ballast_key(r); };
  sort_pass(m, view, view.side, spec);
}

// Vertices to the working prefix in label order, everything else behind.
// unit-scoped so per-level calls stay at block cost.
void repack_by_vertex(MeshMachine& m, const SubmeshView& view, int unit) {
  PassSpec spec;
  spec.key = [](const Record& r) {
    if (live_vertex(r)) {
      SortKeyOut ko;
      ko.tier = Tier::Working;
      ko.k = {r.f[0], 0, 0, 0, 0};
      return ko;
    }
    return ballast_key(r);
  };
  sort_pass(m, view, unit, spec);
}

}  // namespace

CopyRole copy_role(const Record& r) {
  return static_cast<CopyRole>((r.meta & kRoleMask) >> kRoleShift);
}
void set_copy_role(Record& r, CopyRole role) {
  r.meta = (r.meta & ~kRoleMask) | (static_cast<Word>(role) << kRoleShift);
}
int foreign_depth(const Record& r) { return static_cast<int>((r.meta & kDepthMask) >> kDepthShift); }
void set_foreign_depth(Record& r, int depth) {
  r.meta = (r.meta & ~kDepthMask) | (static_cast<Word>(depth) << kDepthShift);
}

Word MsfContext::translate(Word original) const {
  Word x = original;
  for (const auto* map : chain) {
    auto it = map->find(x);
    if (it != map->end()) x = it->second;
  }
  return x;
}

int auto_side(const Graph& g) {
  std::uint64_t need = std::max<std::uint64_t>(g.n_vertices + g.edges.size(), 2 * g.n_vertices);
  int side = 2;
  while (static_cast<std::uint64_t>(side) * side < need) side *= 2;
  return side;
}

void ingest(MeshMachine& m, const Graph& g) {
  g.validate();
  std::uint64_t n = m.processor_count();
  if (g.n_vertices + g.edges.size() > n)
    throw ConfigError("ingest: " + std::to_string(g.n_vertices + g.edges.size()) +
                      " records exceed " + std::to_string(n) + " processors");
  SubmeshView root = m.root_view();
  for (std::uint64_t r = 0; r < n; ++r) {
    int proc = m.proc_index(m.curve_cell(r));
    for (int s = 0; s < kSlots; ++s) m.rec(proc, s) = null_record();
  }
  std::uint64_t rank = 0;
  for (const GraphEdge& e : g.edges) {
    Word lo = std::min(e.u, e.v), hi = std::max(e.u, e.v);
    Record rec = make_edge(lo, hi, e.w, pack_origin(lo, hi, e.index));
    m.rec(m.proc_index(m.curve_cell(rank++)), 0) = rec;
  }
  for (Word v = 0; v < g.n_vertices; ++v)
    m.rec(m.proc_index(m.curve_cell(rank++)), 0) = make_self_loop(v);
  (void)root;
}

// ============================================================================
// Minimum incident edge selection (coarsening step a).
//
// Two sorted passes flag each endpoint segment's minimum under (w, origin);
// a third pass brings the two per-vertex candidates together (each edge
// carries its own candidacy, an edge winning on both endpoints spawns one
// candidacy copy for the second role) and a fourth notifies the winning edge
// records. All ties resolve through the pinned total order, so selections
// are deterministic and match the sequential oracle exactly.
// ============================================================================

namespace {

PassSpec endpoint_pass(int field) {
  PassSpec spec;
  spec.seg_words = 1;
  spec.key = [field](const Record& r) {
    if (live_edge(r)) {
      SortKeyOut ko;
      ko.tier = Tier::Working;
      ko.k = {r.f[field], r.f[3], 0, 0, 0};
      return ko;
    }
    return ballast_key(r);
  };
  spec.role = [](const Record& r) {
    return (live_edge(r) && r.f[0] != r.f[1]) ? ScanRole::Source : ScanRole::None;
  };
  spec.value = [](const Record& r) {
    ScanValue v;
    v.has = true;
    v.v = {r.f[2], r.f[3]};
    return v;
  };
  Word flag = (field == 0) ? kFlagSelectedA : kFlagSelectedB;
  spec.finalize = [flag](Record& r, const RunView& before, const RunView& after) {
    if (r.f[0] == r.f[1]) return;
    std::array<Word, 2> mine{r.f[2], r.f[3]};
    bool best = true;
    if (before.has_value && before.best < mine) best = false;
    if (after.has_value && after.best < mine) best = false;
    if (best) r.set_flag(flag);
  };
  return spec;
}

}  // namespace

std::vector<std::pair<Word, Word>> select_min_incident(MeshMachine& m, const SubmeshView& view) {
  sorted_scan(m, view, view.side, endpoint_pass(0));
  sorted_scan(m, view, view.side, endpoint_pass(1));

  // Candidacy pass: each selected edge competes in the segment of the vertex
  // it was selected for; an edge selected for both endpoints enters the
  // second segment through a copy.
  spawn_pass(m, view, [](const Record& r, Record& out) {
    if (!live_edge(r) || !r.flag(kFlagSelectedA) || !r.flag(kFlagSelectedB)) return false;
    out = Record{};
    out.set_kind(Kind::Copy);
    set_copy_role(out, CopyRole::Candidacy);
    out.f = {r.f[1], r.f[2], r.f[3], 0};
    return true;
  });
  PassSpec cand;
  cand.seg_words = 1;
  cand.density = 4;
  cand.key = [](const Record& r) {
    if (live_edge(r) && (r.flag(kFlagSelectedA) || r.flag(kFlagSelectedB))) {
      SortKeyOut ko;
      ko.tier = Tier::Working;
      Word vkey = r.flag(kFlagSelectedA) ? r.f[0] : r.f[1];
      ko.k = {vkey, r.f[2], r.f[3], 0, 0};
      return ko;
    }
    if (live_copy(r, CopyRole::Candidacy)) {
      SortKeyOut ko;
      ko.tier = Tier::Working;
      ko.k = {r.f[0], r.f[1], r.f[2], 1, 0};
      return ko;
    }
    return ballast_key(r);
  };
  cand.role = [](const Record&) { return ScanRole::Source; };
  cand.value = [](const Record& r) {
    ScanValue v;
    v.has = true;
    if (r.kind() == Kind::Edge)
      v.v = {r.f[2], r.f[3]};
    else
      v.v = {r.f[1], r.f[2]};
    return v;
  };
  cand.finalize = [](Record& r, const RunView& before, const RunView& after) {
    std::array<Word, 2> mine = (r.kind() == Kind::Edge) ? std::array<Word, 2>{r.f[2], r.f[3]}
                                                        : std::array<Word, 2>{r.f[1], r.f[2]};
    bool best = true;
    if (before.has_value && before.best < mine) best = false;
    if (after.has_value && after.best < mine) best = false;
    if (best) r.set_flag(kFlagSegMin);
  };
  sorted_scan(m, view, view.side, cand);

  // Gather per-vertex winners for callers and oracle checks (inspection).
  std::vector<std::pair<Word, Word>> winners;
  local_pass(m, view, [&](Record& r) {
    if (live_edge(r) && r.flag(kFlagSegMin))
      winners.emplace_back(r.flag(kFlagSelectedA) ? r.f[0] : r.f[1], r.f[3]);
    else if (live_copy(r, CopyRole::Candidacy) && r.flag(kFlagSegMin))
      winners.emplace_back(r.f[0], r.f[2]);
  });
  std::sort(winners.begin(), winners.end());

  // Notify edges whose copy won.
  PassSpec notify;
  notify.seg_words = 1;
  notify.density = 4;
  notify.key = [](const Record& r) {
    if (live_copy(r, CopyRole::Candidacy)) {
      SortKeyOut ko;
      ko.tier = Tier::Working;
      ko.k = {r.f[2], 0, r.f[0], 0, 0};
      return ko;
    }
    if (live_edge(r)) {
      SortKeyOut ko;
      ko.tier = Tier::Working;
      ko.k = {r.f[3], 1, 0, 0, 0};
      return ko;
    }
    return ballast_key(r);
  };
  notify.role = [](const Record& r) {
    return live_copy(r, CopyRole::Candidacy) ? ScanRole::Source : ScanRole::None;
  };
  notify.value = [](const Record& r) {
    ScanValue v;
    v.has = true;
    v.v = {r.flag(kFlagSegMin) ? Word{0} : Word{1}, 0};
    return v;
  };
  notify.finalize = [](Record& r, const RunView& before, const RunView& after) {
    if (r.kind() != Kind::Edge) return;
    bool copy_won = (before.has_value && before.best[0] == 0) ||
                    (after.has_value && after.best[0] == 0);
    if (copy_won || r.flag(kFlagSegMin)) r.set_flag(kFlagWinner);
    r.set_flag(kFlagSelectedA, false);
    r.set_flag(kFlagSelectedB, false);
    r.set_flag(kFlagSegMin, false);
  };
  sorted_scan(m, view, view.side, notify);
  local_pass(m, view, [](Record& r) {
    if (is_copy(r, CopyRole::Candidacy)) r = null_record();
  });
  return winners;
}

// ============================================================================
// Tree labeling.
// ============================================================================

namespace {

// Co-sort of a directory of Vertex records (keyed by label, payload = current
// ptr) against queries; the query's answer lands in `apply`.
struct VertexLookup {
  std::function<bool(const Record&)> is_query;
  std::function<Word(const Record&)> query_key;
  std::function<void(Record&, bool found, Word answer, Word aux)> apply;
  // Extra payload word carried beside the pointer (directory f3 by default).
  bool carry_f3 = false;
};

void vertex_lookup(MeshMachine& m, const SubmeshView& view, int unit, const VertexLookup& lk) {
  PassSpec spec;
  spec.seg_words = 1;
  spec.density = 4;
  spec.key = [&lk](const Record& r) {
    if (live_vertex(r)) {
      SortKeyOut ko;
      ko.tier = Tier::Working;
      ko.k = {r.f[0], 0, 0, 0, 0};
      return ko;
    }
    if (lk.is_query(r)) {
      SortKeyOut ko;
      ko.tier = Tier::Working;
      // f2/f3 carry a unique identity on every query kind (holder label or
      // edge origin); two queries may share the same lookup label.
      ko.k = {lk.query_key(r), 1, r.f[2], r.f[3], r.f[0]};
      return ko;
    }
    return ballast_key(r);
  };
  spec.role = [&lk](const Record& r) {
    if (live_vertex(r)) return ScanRole::Source;
    if (lk.is_query(r)) return ScanRole::Receiver;
    return ScanRole::None;
  };
  bool carry = lk.carry_f3;
  spec.value = [carry](const Record& r) {
    ScanValue v;
    v.has = true;
    v.v = {r.f[1], carry ? r.f[3] : r.f[0]};
    return v;
  };
  spec.finalize = [&lk](Record& r, const RunView& before, const RunView& after) {
    if (live_vertex(r)) {
      if (before.sources + after.sources > 0)
        throw ContractError("lookup: duplicate directory labels");
      return;
    }
    bool found = before.has_value || after.has_value;
    std::array<Word, 2> best{};
    if (before.has_value) best = before.best;
    if (after.has_value && (!before.has_value || after.best < best)) best = after.best;
    lk.apply(r, found, found ? best[0] : kNullWord, found ? best[1] : kNullWord);
  };
  sorted_scan(m, view, unit, spec);
}

// Synthesize one Vertex record per label occurring in the live tree-edge
// copies (two candidate waves deduplicated by keep-first).
void synthesize_roster(MeshMachine& m, const SubmeshView& view) {
  for (int wave = 0; wave < 2; ++wave) {
    spawn_pass(m, view, [wave](const Record& r, Record& out) {
      if (!live_copy(r, CopyRole::TreeEdge)) return false;
      out = Record{};
      out.set_kind(Kind::Vertex);
      Word label = wave == 0 ? r.f[0] : r.f[1];
      Word other = wave == 0 ? r.f[1] : r.f[0];
      out.f = {label, label, kNullWord, other + 1};
      return true;
    });
    PassSpec dedup;
    dedup.seg_words = 1;
    dedup.density = 4;
    dedup.key = [](const Record& r) {
      if (live_vertex(r)) {
        SortKeyOut ko;
        ko.tier = Tier::Working;
        ko.k = {r.f[0], r.f[3], 0, 0, 0};
        return ko;
      }
      return ballast_key(r);
    };
    dedup.role = [](const Record&) { return ScanRole::None; };
    dedup.finalize = [](Record& r, const RunView& before, const RunView&) {
      if (before.any) r = null_record();
    };
    sorted_scan(m, view, view.side, dedup);
    local_pass(m, view, [](Record& r) {
      if (live_vertex(r)) r.f[3] = 0;
    });
    repack(m, view);
  }
}

}  // namespace

void build_directed_forest(MeshMachine& m, const SubmeshView& view) {
  // Each vertex learns its minimum tree neighbor from the two endpoint roles
  // of the tree-edge copies, then points at it (or at itself when it is the
  // local minimum).
  for (int field = 0; field < 2; ++field) {
    PassSpec spec;
    spec.seg_words = 1;
    spec.density = 4;
    spec.key = [field](const Record& r) {
      if (live_copy(r, CopyRole::TreeEdge)) {
        SortKeyOut ko;
        ko.tier = Tier::Working;
        ko.k = {r.f[field], 0, r.f[1 - field], 0, 0};
        return ko;
      }
      if (live_vertex(r)) {
        SortKeyOut ko;
        ko.tier = Tier::Working;
        ko.k = {r.f[0], 1, 0, 0, 0};
        return ko;
      }
      return ballast_key(r);
    };
    spec.role = [field](const Record& r) {
      if (live_copy(r, CopyRole::TreeEdge)) return ScanRole::Source;
      if (live_vertex(r)) return ScanRole::Receiver;
      return ScanRole::None;
    };
    spec.value = [field](const Record& r) {
      ScanValue v;
      v.has = true;
      v.v = {r.f[1 - field], r.f[1 - field]};
      return v;
    };
    spec.finalize = [](Record& r, const RunView& before, const RunView& after) {
      if (r.kind() != Kind::Vertex) return;
      Word best = kNullWord;
      if (before.has_value) best = before.best[0];
      if (after.has_value) best = std::min(best, after.best[0]);
      r.f[2] = std::min(r.f[2], best);
    };
    sorted_scan(m, view, view.side, spec);
  }
  local_pass(m, view, [](Record& r) {
    if (live_vertex(r)) r.f[1] = (r.f[2] < r.f[0]) ? r.f[2] : r.f[0];
  });
}

void resolve_greatest_ancestors(MeshMachine& m, const SubmeshView& view) {
  // Sort vertices by their own label; pointers only ever reference smaller
  // labels, so every lookup target sits in the same or an earlier quadrant at
  // every block size.
  PassSpec byv;
  byv.key = [](const Record& r) {
    if (live_vertex(r)) {
      SortKeyOut ko;
      ko.tier = Tier::Working;
      ko.k = {r.f[0], 0, 0, 0, 0};
      return ko;
    }
    return ballast_key(r);
  };
  sort_pass(m, view, view.side, byv);

  // Within-processor resolution (the 1x1 base case).
  std::uint64_t nproc = view.processors();
  std::uint64_t base = m.view_base(view);
  for (std::uint64_t r = 0; r < nproc; ++r) {
    int proc = m.proc_index(m.curve_cell(base + r));
    for (int pass = 0; pass < 2; ++pass)
      for (int s = 0; s < 2; ++s) {
        Record& rec = m.rec(proc, s);
        if (!live_vertex(rec)) continue;
        for (int t = 0; t < 2; ++t) {
          Record& peer = m.rec(proc, t);
          if (t == s || !live_vertex(peer)) continue;
          if (peer.f[0] == rec.f[1] && peer.f[1] != peer.f[0]) rec.f[1] = peer.f[1];
        }
      }
  }

  for (int bs = 2; bs <= view.side; bs *= 2) {
    std::uint64_t block_area = static_cast<std::uint64_t>(bs) * bs;
    for (int iter = 0; iter < 3; ++iter) {
      repack_by_vertex(m, view, bs);
      // Stamp each vertex with its quadrant index inside its block.
      for (std::uint64_t r = 0; r < nproc; ++r) {
        Word quad = (r % block_area) / (block_area / 4);
        int proc = m.proc_index(m.curve_cell(base + r));
        for (int s = 0; s < 2; ++s) {
          Record& rec = m.rec(proc, s);
          if (live_vertex(rec)) rec.f[3] = quad;
        }
      }
      spawn_pass(m, view, [](const Record& r, Record& out) {
        if (!live_vertex(r) || r.f[1] == r.f[0]) return false;
        out = Record{};
        out.set_kind(Kind::Copy);
        set_copy_role(out, CopyRole::Query);
        out.f = {r.f[1], kNullWord, r.f[0], r.f[3]};
        return true;
      });
      // Resolve against vertices in strictly earlier quadrants of the block.
      VertexLookup ask;
      ask.carry_f3 = true;
      ask.is_query = [](const Record& r) { return live_copy(r, CopyRole::Query); };
      ask.query_key = [](const Record& r) { return r.f[0]; };
      ask.apply = [](Record& r, bool found, Word answer, Word dir_quad) {
        if (found && dir_quad < r.f[3]) r.f[1] = answer;
      };
      vertex_lookup(m, view, bs, ask);
      // Deliver answers back to the holders.
      PassSpec back;
      back.seg_words = 1;
      back.density = 4;
      back.key = [](const Record& r) {
        if (live_copy(r, CopyRole::Query)) {
          SortKeyOut ko;
          ko.tier = Tier::Working;
          ko.k = {r.f[2], 0, r.f[0], 0, 0};
          return ko;
        }
        if (live_vertex(r)) {
          SortKeyOut ko;
          ko.tier = Tier::Working;
          ko.k = {r.f[0], 1, 0, 0, 0};
          return ko;
        }
        return ballast_key(r);
      };
      back.role = [](const Record& r) {
        if (live_copy(r, CopyRole::Query)) return ScanRole::Source;
        if (live_vertex(r)) return ScanRole::Receiver;
        return ScanRole::None;
      };
      back.value = [](const Record& r) {
        ScanValue v;
        v.has = r.f[1] != kNullWord;
        v.v = {r.f[1], r.f[2]};
        return v;
      };
      back.finalize = [](Record& r, const RunView& before, const RunView& after) {
        if (r.kind() != Kind::Vertex) return;
        Word answer = kNullWord;
        if (before.has_value) answer = before.best[0];
        if (after.has_value) answer = std::min(answer, after.best[0]);
        if (answer == kNullWord) return;
        if (answer > r.f[1]) throw InternalError("resolve: pointer increased");
        r.f[1] = answer;
      };
      sorted_scan(m, view, bs, back);
      local_pass(m, view, [](Record& r) {
        if (is_copy(r, CopyRole::Query)) r = null_record();
      });
    }
  }
}

void adopt_singletons(MeshMachine& m, const SubmeshView& view) {
  repack_by_vertex(m, view, view.side);
  // In-pointer markers under the initial pointers (a vertex points at its
  // minimum neighbor only when that neighbor's label is smaller).
  spawn_pass(m, view, [](const Record& r, Record& out) {
    if (!live_vertex(r) || r.f[2] == kNullWord || r.f[2] >= r.f[0]) return false;
    out = Record{};
    out.set_kind(Kind::Copy);
    set_copy_role(out, CopyRole::Marker);
    out.f = {r.f[2], r.f[0], r.f[0], 0};
    return true;
  });
  PassSpec mark;
  mark.seg_words = 1;
  mark.density = 4;
  mark.key = [](const Record& r) {
    if (live_copy(r, CopyRole::Marker)) {
      SortKeyOut ko;
      ko.tier = Tier::Working;
      ko.k = {r.f[0], 0, r.f[1], 0, 0};
      return ko;
    }
    if (live_vertex(r)) {
      SortKeyOut ko;
      ko.tier = Tier::Working;
      ko.k = {r.f[0], 1, 0, 0, 0};
      return ko;
    }
    return ballast_key(r);
  };
  mark.role = [](const Record& r) {
    return live_copy(r, CopyRole::Marker) ? ScanRole::Source : ScanRole::None;
  };
  mark.value = [](const Record&) { return ScanValue{}; };
  mark.finalize = [](Record& r, const RunView& before, const RunView& after) {
    if (r.kind() != Kind::Vertex) return;
    bool pointed_at = before.sources + after.sources > 0;
    if (r.f[1] == r.f[0] && !pointed_at && r.f[2] != kNullWord) r.set_flag(kFlagTmpA);
    if (r.f[2] == kNullWord) r.set_flag(kFlagFinished);
  };
  sorted_scan(m, view, view.side, mark);
  local_pass(m, view, [](Record& r) {
    if (is_copy(r, CopyRole::Marker)) r = null_record();
  });

  repack_by_vertex(m, view, view.side);

  // Singleton roots adopt their minimum neighbor's resolved root.
  spawn_pass(m, view, [](const Record& r, Record& out) {
    if (!live_vertex(r) || !r.flag(kFlagTmpA)) return false;
    out = Record{};
    out.set_kind(Kind::Copy);
    set_copy_role(out, CopyRole::Query);
    out.f = {r.f[2], kNullWord, r.f[0], 0};
    return true;
  });
  VertexLookup ask;
  ask.is_query = [](const Record& r) { return live_copy(r, CopyRole::Query); };
  ask.query_key = [](const Record& r) { return r.f[0]; };
  ask.apply = [](Record& r, bool found, Word answer, Word) {
    if (!found) throw InternalError("adopt: neighbor not in roster");
    r.f[1] = answer;
  };
  vertex_lookup(m, view, view.side, ask);
  PassSpec back;
  back.seg_words = 1;
  back.density = 4;
  back.key = [](const Record& r) {
    if (live_copy(r, CopyRole::Query)) {
      SortKeyOut ko;
      ko.tier = Tier::Working;
      ko.k = {r.f[2], 0, r.f[0], 0, 0};
      return ko;
    }
    if (live_vertex(r)) {
      SortKeyOut ko;
      ko.tier = Tier::Working;
      ko.k = {r.f[0], 1, 0, 0, 0};
      return ko;
    }
    return ballast_key(r);
  };
  back.role = [](const Record& r) {
    return live_copy(r, CopyRole::Query) ? ScanRole::Source : ScanRole::None;
  };
  back.value = [](const Record& r) {
    ScanValue v;
    v.has = true;
    v.v = {r.f[1], r.f[2]};
    return v;
  };
  back.finalize = [](Record& r, const RunView& before, const RunView& after) {
    if (r.kind() != Kind::Vertex) return;
    if (before.has_value)
      r.f[1] = before.best[0];
    else if (after.has_value)
      r.f[1] = after.best[0];
  };
  sorted_scan(m, view, view.side, back);
  local_pass(m, view, [](Record& r) {
    if (is_copy(r, CopyRole::Query)) r = null_record();
    if (live_vertex(r)) r.set_flag(kFlagTmpA, false);
  });
}

namespace {

// Host resolution of the connecting forest: every root label maps to the
// minimum label of its tree (which is exactly what the recursive labeling
// converges to). Used for the constant-size base case and as the audited
// fallback when the view has no room for an isolated recursion target.
void host_resolve_connecting(MeshMachine& m, const SubmeshView& view) {
  std::map<Word, Word> parent;
  auto find = [&](Word x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  std::vector<std::pair<Word, Word>> edges;
  local_pass(m, view, [&](Record& r) {
    if (!live_copy(r, CopyRole::TreeEdge)) return;
    edges.emplace_back(r.f[0], r.f[1]);
    r = null_record();
  });
  for (auto [x, y] : edges) {
    parent.try_emplace(x, x);
    parent.try_emplace(y, y);
  }
  for (auto [x, y] : edges) {
    Word a = find(x), b = find(y);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  // Inject the directory of final roots (marked vertices) into staging slots.
  std::uint64_t base = m.view_base(view);
  std::uint64_t rank = 0;
  auto place = [&](const Record& rec) {
    while (rank < 2 * view.processors()) {
      int proc = m.proc_index(m.curve_cell(base + rank / 2));
      int slot = 2 + static_cast<int>(rank % 2);
      ++rank;
      if (m.rec(proc, slot).is_null()) {
        m.rec(proc, slot) = rec;
        return;
      }
    }
    throw InternalError("host resolve: no staging room");
  };
  for (auto& [label, p] : parent) {
    (void)p;
    Record rec;
    rec.set_kind(Kind::Vertex);
    rec.set_flag(kFlagMarker);
    rec.f = {label, find(label), kNullWord, 0};
    place(rec);
  }
}

}  // namespace

std::unordered_map<Word, Word> label_trees(MeshMachine& m, const SubmeshView& view,
                                           MsfContext& ctx, int depth) {
  // Normalize: tree edges to the working prefix so the roster waves can spawn.
  PassSpec norm;
  norm.key = [](const Record& r) {
    if (live_copy(r, CopyRole::TreeEdge)) {
      SortKeyOut ko;
      ko.tier = Tier::Working;
      ko.k = {r.f[0], r.f[1], r.f[3], 0, 0};
      return ko;
    }
    return ballast_key(r);
  };
  sort_pass(m, view, view.side, norm);

  synthesize_roster(m, view);
  std::uint64_t live = host_count(m, view, [](const Record& r) { return live_vertex(r); });
  LabelAudit la;
  la.view_side = view.side;
  la.live_vertices = live;
  std::unordered_map<Word, Word> out;
  if (live == 0) {
    ctx.audit.labelings.push_back(la);
    return out;
  }

  build_directed_forest(m, view);
  resolve_greatest_ancestors(m, view);
  adopt_singletons(m, view);
  la.subtrees_after = host_count(m, view, [](const Record& r) {
    return live_vertex(r) && r.f[1] == r.f[0] && r.f[2] != kNullWord;
  });
  ctx.audit.labelings.push_back(la);

  // Relabel tree edges to subtree roots; edges inside one subtree drop out.
  for (int field = 0; field < 2; ++field) {
    VertexLookup lk;
    lk.is_query = [](const Record& r) { return live_copy(r, CopyRole::TreeEdge); };
    lk.query_key = [field](const Record& r) { return r.f[field]; };
    lk.apply = [field](Record& r, bool found, Word answer, Word) {
      if (!found) throw InternalError("label: tree endpoint missing from roster");
      r.f[field] = answer;
    };
    vertex_lookup(m, view, view.side, lk);
  }
  local_pass(m, view, [](Record& r) {
    if (live_copy(r, CopyRole::TreeEdge) && r.f[0] == r.f[1]) r = null_record();
  });

  // Record this level's contraction map before unwinding.
  LedgerLevel level;
  level.level = ctx.next_level_tag++;
  local_pass(m, view, [&](Record& r) {
    if (live_vertex(r)) level.entries.emplace_back(r.f[0], r.f[1]);
  });
  std::sort(level.entries.begin(), level.entries.end());
  ctx.ledger.push_back(std::move(level));

  std::uint64_t connecting =
      count_pass(m, view, [](const Record& r) { return live_copy(r, CopyRole::TreeEdge); });

  if (connecting > 0) {
    // Pick the smallest curve-entry block that the recursion fits in; if the
    // view is too crowded for an isolated block, resolve on the host at a
    // pessimistic charge.
    std::uint64_t ballast = host_count(m, view, [](const Record& r) {
      return !live_copy(r, CopyRole::TreeEdge);
    });
    SubmeshView target = view;
    bool found_target = false;
    if (connecting > 8) {
      std::vector<SubmeshView> chain;
      for (SubmeshView t = m.quadrant(view, 0); t.side >= 2; t = m.quadrant(t, 0))
        chain.push_back(t);
      for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
        std::uint64_t procs = it->processors();
        bool fits = 2 * procs >= 4 * connecting + 4;
        bool clear = (ballast + 1) / 2 <= view.processors() - procs;
        if (fits && clear) {
          target = *it;
          found_target = true;
          break;
        }
      }
    }
    if (connecting <= 8 || !found_target) {
      PhaseScope ps(m, "base");
      host_resolve_connecting(m, view);
      std::uint64_t charge = 64;
      if (connecting > 8) {
        // Would-be recursion cost, charged pessimistically.
        std::uint64_t levels = std::bit_width(live);
        charge = levels * 12 * (sort_cost(view.side) + scan_cost(view.side));
      }
      m.advance(charge);
    } else {
      {
        PhaseScope ps(m, "route");
        std::uint64_t flagged = compact_route(
            m, view, target, [](const Record& r) { return live_copy(r, CopyRole::TreeEdge); });
        ctx.audit.routes.push_back(RouteAudit{flagged, 2 * target.processors()});
      }
      local_pass(m, view, [&](Record& r) {
        if (foreign_depth(r) == 0 && !is_copy(r, CopyRole::TreeEdge))
          set_foreign_depth(r, depth + 1);
      });
      label_trees(m, target, ctx, depth + 1);
      // The sub-call's roster (left live) is the unwind directory; mark it.
      local_pass(m, view, [&](Record& r) {
        if (live_vertex(r)) r.set_flag(kFlagMarker);
      });
      local_pass(m, view, [&](Record& r) {
        if (foreign_depth(r) == depth + 1) set_foreign_depth(r, 0);
      });
    }

    // Unwind: rewrite every pointer through the returned directory; roots the
    // recursion never saw are finished and stay fixed.
    PassSpec unwind;
    unwind.seg_words = 1;
    unwind.density = 4;
    unwind.key = [](const Record& r) {
      if (live_vertex(r) && r.flag(kFlagMarker)) {
        SortKeyOut ko;
        ko.tier = Tier::Working;
        ko.k = {r.f[0], 0, 0, 0, 0};
        return ko;
      }
      if (live_vertex(r)) {
        SortKeyOut ko;
        ko.tier = Tier::Working;
        ko.k = {r.f[1], 1, r.f[0], 0, 0};
        return ko;
      }
      return ballast_key(r);
    };
    unwind.role = [](const Record& r) {
      if (live_vertex(r) && r.flag(kFlagMarker)) return ScanRole::Source;
      if (live_vertex(r)) return ScanRole::Receiver;
      return ScanRole::None;
    };
    unwind.value = [](const Record& r) {
      ScanValue v;
      v.has = true;
      v.v = {r.f[1], r.f[0]};
      return v;
    };
    unwind.finalize = [](Record& r, const RunView& before, const RunView& after) {
      if (r.flag(kFlagMarker)) {
        if (before.sources + after.sources > 0)
          throw ContractError("unwind: duplicate directory labels");
        return;
      }
      if (before.has_value)
        r.f[1] = before.best[0];
      else if (after.has_value)
        r.f[1] = after.best[0];
    };
    sorted_scan(m, view, view.side, unwind);
    local_pass(m, view, [](Record& r) {
      if (live_vertex(r) && r.flag(kFlagMarker)) r = null_record();
    });
  }

  local_pass(m, view, [&](Record& r) {
    if (live_vertex(r)) out.emplace(r.f[0], r.f[1]);
  });
  return out;
}

// ============================================================================
// Coarsening rounds and the recursive driver.
// ============================================================================

void coarsen(MeshMachine& m, const SubmeshView& view, MsfContext& ctx, int depth, int round) {
  PhaseScope ps(m, "coarsen");
  RoundAudit ra;
  ra.view_side = view.side;
  ra.round = round;
  ra.unfinished_before = count_edge_labels(m, view);

  select_min_incident(m, view);

  // Winners become tree edges for the labeling and retire as selected MSF
  // edges (their endpoint fields go stale; origins identify them).
  repack(m, view);
  spawn_pass(m, view, [](const Record& r, Record& out) {
    if (!live_edge(r) || !r.flag(kFlagWinner)) return false;
    out = Record{};
    out.set_kind(Kind::Copy);
    set_copy_role(out, CopyRole::TreeEdge);
    out.f = {r.f[0], r.f[1], 0, r.f[3]};
    return true;
  });
  local_pass(m, view, [](Record& r) {
    if (live_edge(r) && r.flag(kFlagWinner)) {
      r.set_flag(kFlagWinner, false);
      r.set_kind(Kind::Result);
    }
  });

  std::unordered_map<Word, Word> round_map;
  {
    PhaseScope label(m, "label");
    round_map = label_trees(m, view, ctx, depth);
  }

  // Relabel surviving edges to supervertex labels via the roster directory.
  for (int field = 0; field < 2; ++field) {
    VertexLookup lk;
    lk.is_query = [](const Record& r) { return live_edge(r); };
    lk.query_key = [field](const Record& r) { return r.f[field]; };
    lk.apply = [field](Record& r, bool found, Word answer, Word) {
      if (!found) throw InternalError("coarsen: edge endpoint missing from roster");
      r.f[field] = answer;
    };
    vertex_lookup(m, view, view.side, lk);
  }
  local_pass(m, view, [](Record& r) {
    if (live_vertex(r)) r = null_record();
  });

  // Drop intra-supervertex edges and all but the lightest parallel edge.
  PassSpec dedup;
  dedup.seg_words = 2;
  dedup.key = [](const Record& r) {
    if (live_edge(r)) {
      SortKeyOut ko;
      ko.tier = Tier::Working;
      ko.k = {std::min(r.f[0], r.f[1]), std::max(r.f[0], r.f[1]), r.f[2], r.f[3], 0};
      return ko;
    }
    return ballast_key(r);
  };
  dedup.role = [](const Record&) { return ScanRole::None; };
  dedup.finalize = [](Record& r, const RunView& before, const RunView&) {
    if (r.f[0] == r.f[1] || before.any) r = null_record();
  };
  sorted_scan(m, view, view.side, dedup);

  ra.unfinished_after = count_edge_labels(m, view);
  ctx.audit.rounds.push_back(ra);

  auto map_ptr = std::make_unique<std::unordered_map<Word, Word>>(std::move(round_map));
  ctx.chain.push_back(map_ptr.get());
  ctx.owned_maps.push_back(std::move(map_ptr));
}

namespace {

void base_case_msf(MeshMachine& m, const SubmeshView& view) {
  PhaseScope ps(m, "base");
  std::vector<Record*> edges;
  local_pass(m, view, [&](Record& r) {
    if (r.kind() == Kind::SelfLoop && live(r)) {
      r = null_record();
      return;
    }
    if (!live_edge(r)) return;
    if (r.f[0] == r.f[1]) {
      r = null_record();
      return;
    }
    edges.push_back(&r);
  });
  std::sort(edges.begin(), edges.end(), [](const Record* a, const Record* b) {
    return std::make_pair(a->f[2], a->f[3]) < std::make_pair(b->f[2], b->f[3]);
  });
  std::map<Word, Word> parent;
  auto find = [&](Word x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (Record* e : edges) {
    parent.try_emplace(e->f[0], e->f[0]);
    parent.try_emplace(e->f[1], e->f[1]);
    Word a = find(e->f[0]), b = find(e->f[1]);
    if (a == b) {
      *e = null_record();
    } else {
      parent[std::max(a, b)] = std::min(a, b);
      e->set_kind(Kind::Result);
    }
  }
  m.advance(2ull * kRecordWords * view.processors());
}

}  // namespace

void msf(MeshMachine& m, const SubmeshView& view, MsfContext& ctx, int depth) {
  std::size_t chain_mark = ctx.chain.size();
  if (view.side <= 4) {
    base_case_msf(m, view);
    local_pass(m, view, [](Record& r) {
      if (r.kind() == Kind::Result && foreign_depth(r) == 0) r.set_flag(kFlagPending);
    });
    return;
  }

  // Ingestion markers and input self-loop edges are absorbed up front: the
  // vertex roster lives with the host from here on and isolated vertices
  // already have their labels.
  local_pass(m, view, [](Record& r) {
    if (live(r) && (r.kind() == Kind::SelfLoop || (r.kind() == Kind::Edge && r.f[0] == r.f[1])))
      r = null_record();
  });

  // The schedule is oblivious: every call runs its full complement of rounds
  // and recursions whether or not data remains, so step counts depend only on
  // the mesh side and the configured round count (rounds on an exhausted
  // working set move nothing but cost their fixed sweeps all the same).
  for (int round = 1; round <= ctx.opt.rounds; ++round) {
    count_pass(m, view, [](const Record& r) { return live_edge(r); });
    coarsen(m, view, ctx, depth, round);
  }

  CallAudit ca;
  ca.view_side = view.side;
  ca.labels_after_rounds = count_edge_labels(m, view);
  ctx.audit.calls.push_back(ca);

  {
    // The four quadrants recurse concurrently on their resident edges;
    // everything else in the view sits out as marked ballast.
    local_pass(m, view, [&](Record& r) {
      if (live(r) && r.kind() != Kind::Edge) set_foreign_depth(r, depth + 1);
    });
    std::vector<std::function<void()>> branches;
    for (int i = 0; i < 4; ++i) {
      SubmeshView q = m.quadrant(view, i);
      branches.push_back([&m, q, &ctx, depth]() { msf(m, q, ctx, depth + 1); });
    }
    m.parallel_max(branches);
    ctx.chain.resize(chain_mark);
    local_pass(m, view, [&](Record& r) {
      if (foreign_depth(r) == depth + 1) set_foreign_depth(r, 0);
    });
  }

  // Combine: the quadrants' selected edges, re-expressed at the current
  // contraction level, form one subproblem in the entry quadrant-of-quadrant.
  std::uint64_t pending = count_pass(m, view, [](const Record& r) {
    return r.kind() == Kind::Result && r.flag(kFlagPending) && foreign_depth(r) == 0;
  });
  {
    SubmeshView target = m.quadrant(m.quadrant(view, 0), 0);
    std::uint64_t ballast = host_count(m, view, [](const Record& r) {
      return !(r.kind() == Kind::Result && r.flag(kFlagPending) && foreign_depth(r) == 0);
    });
    bool clear = (ballast + 1) / 2 <= view.processors() - target.processors();
    if (!clear && pending > 0) {
      // No isolated subregion available; solve the union on the host at a
      // pessimistic recursion-equivalent charge.
      PhaseScope ps(m, "base");
      std::vector<Record*> pend;
      local_pass(m, view, [&](Record& r) {
        if (r.kind() == Kind::Result && r.flag(kFlagPending) && foreign_depth(r) == 0)
          pend.push_back(&r);
      });
      for (Record* r : pend) {
        r->f[0] = ctx.translate(origin_lo(r->f[3]));
        r->f[1] = ctx.translate(origin_hi(r->f[3]));
        r->set_flag(kFlagPending, false);
        r->set_kind(Kind::Edge);
      }
      base_case_msf(m, view);
      m.advance(20ull * ctx.opt.rounds * sort_cost(view.side));
    } else {
      {
        PhaseScope ps(m, "route");
        std::uint64_t flagged = compact_route(m, view, target, [](const Record& r) {
          return r.kind() == Kind::Result && r.flag(kFlagPending) && foreign_depth(r) == 0;
        });
        ctx.audit.routes.push_back(RouteAudit{flagged, 2 * target.processors()});
        // Re-expressing the union at the current supervertex labels stands in
        // for consulting the resident vertex directory; charged as the two
        // lookup sweeps it replaces.
        local_pass(m, target, [&](Record& r) {
          if (r.kind() != Kind::Result || !r.flag(kFlagPending) || foreign_depth(r) != 0) return;
          r.f[0] = ctx.translate(origin_lo(r.f[3]));
          r.f[1] = ctx.translate(origin_hi(r.f[3]));
          if (r.f[0] == r.f[1])
            throw InternalError("combine: selected edge contracted to a loop");
          r.set_flag(kFlagPending, false);
          r.set_kind(Kind::Edge);
        });
        m.advance(2 * (sort_cost(view.side) + scan_cost(view.side)));
      }
      local_pass(m, view, [&](Record& r) {
        if (live(r) && r.kind() != Kind::Edge) set_foreign_depth(r, depth + 1);
      });
      msf(m, target, ctx, depth + 1);
      local_pass(m, view, [&](Record& r) {
        if (foreign_depth(r) == depth + 1) set_foreign_depth(r, 0);
      });
    }
  }

  ctx.chain.resize(chain_mark);
  local_pass(m, view, [](Record& r) {
    if (r.kind() == Kind::Result && foreign_depth(r) == 0) r.set_flag(kFlagPending);
  });
}

std::vector<Word> connected_components(MeshMachine& m, const SubmeshView& view, MsfContext& ctx,
                                       Word n_vertices) {
  PhaseScope ps(m, "cc");
  repack(m, view);
  spawn_pass(m, view, [](const Record& r, Record& out) {
    if (r.kind() != Kind::Result || foreign_depth(r) != 0) return false;
    out = Record{};
    out.set_kind(Kind::Copy);
    set_copy_role(out, CopyRole::TreeEdge);
    out.f = {origin_lo(r.f[3]), origin_hi(r.f[3]), 0, r.f[3]};
    return true;
  });
  std::unordered_map<Word, Word> map = label_trees(m, view, ctx, 0);
  local_pass(m, view, [](Record& r) {
    if (live_vertex(r)) r = null_record();
  });
  std::vector<Word> out(n_vertices);
  for (Word v = 0; v < n_vertices; ++v) {
    auto it = map.find(v);
    out[v] = it == map.end() ? v : it->second;
  }
  return out;
}

std::unordered_map<Word, Word> unwind_labels(MeshMachine& m, const SubmeshView& view,
                                             const std::vector<LedgerLevel>& levels) {
  // Deepest first: rewrite each level's parents through the already-final
  // deeper map, one lookup sweep per level.
  std::unordered_map<Word, Word> final_map;
  for (auto lvl = levels.rbegin(); lvl != levels.rend(); ++lvl) {
    std::unordered_map<Word, Word> here;
    for (auto [child, parent] : lvl->entries)
      if (!here.emplace(child, parent).second)
        throw ContractError("unwind_labels: duplicate child label in one level");
    if (final_map.empty()) {
      final_map = std::move(here);
      continue;
    }
    // Inject the deeper map as a marked directory and this level's entries as
    // queries, then run the lookup sweep.
    std::uint64_t rank = 0;
    std::uint64_t base = m.view_base(view);
    auto place = [&](const Record& rec) {
      if (rank >= 2 * view.processors())
        throw CapacityError("unwind_labels: level does not fit the view");
      int proc = m.proc_index(m.curve_cell(base + rank / 2));
      m.rec(proc, static_cast<int>(rank % 2)) = rec;
      ++rank;
    };
    for (auto& [child, parent] : final_map) {
      Record rec;
      rec.set_kind(Kind::Vertex);
      rec.set_flag(kFlagMarker);
      rec.f = {child, parent, kNullWord, 0};
      place(rec);
    }
    for (auto& [child, parent] : here) {
      Record rec;
      rec.set_kind(Kind::Copy);
      set_copy_role(rec, CopyRole::Query);
      rec.f = {parent, kNullWord, child, 0};
      place(rec);
    }
    while (rank < 2 * view.processors()) place(null_record());
    rank -= 0;

    PassSpec pass;
    pass.seg_words = 1;
    pass.key = [](const Record& r) {
      if (live_vertex(r) && r.flag(kFlagMarker)) {
        SortKeyOut ko;
        ko.tier = Tier::Working;
        ko.k = {r.f[0], 0, 0, 0, 0};
        return ko;
      }
      if (live_copy(r, CopyRole::Query)) {
        SortKeyOut ko;
        ko.tier = Tier::Working;
        ko.k = {r.f[0], 1, r.f[2], 0, 0};
        return ko;
      }
      return ballast_key(r);
    };
    pass.role = [](const Record& r) {
      if (live_vertex(r) && r.flag(kFlagMarker)) return ScanRole::Source;
      return ScanRole::None;
    };
    pass.value = [](const Record& r) {
      ScanValue v;
      v.has = true;
      v.v = {r.f[1], r.f[0]};
      return v;
    };
    pass.finalize = [](Record& r, const RunView& before, const RunView& after) {
      if (r.flag(kFlagMarker)) {
        if (before.sources + after.sources > 0)
          throw ContractError("unwind_labels: duplicate directory labels");
        return;
      }
      if (before.has_value)
        r.f[1] = before.best[0];
      else if (after.has_value)
        r.f[1] = after.best[0];
    };
    sorted_scan(m, view, view.side, pass);

    std::unordered_map<Word, Word> next;
    local_pass(m, view, [&](Record& r) {
      if (live_copy(r, CopyRole::Query))
        next.emplace(r.f[2], r.f[1] == kNullWord ? r.f[0] : r.f[1]);
      r = null_record();
    });
    final_map = std::move(next);
  }
  return final_map;
}

MsfRun run_pipeline(MeshMachine& m, const Graph& g, const MsfOptions& opt) {
  ingest(m, g);
  MsfContext ctx;
  ctx.opt = opt;
  SubmeshView root = m.root_view();
  msf(m, root, ctx, 0);

  MsfRun run;
  local_pass(m, root, [&](Record& r) {
    if (r.kind() != Kind::Result) return;
    if (!r.flag(kFlagPending)) throw InternalError("pipeline: non-pending result at top level");
    run.output.msf_origins.insert(static_cast<std::uint32_t>(origin_index(r.f[3])));
    run.msf_weight += r.f[2];
  });
  run.output.component_of = connected_components(m, root, ctx, g.n_vertices);
  std::set<Word> distinct(run.output.component_of.begin(), run.output.component_of.end());
  run.components = distinct.size();
  run.steps = m.report();
  run.audit = std::move(ctx.audit);
  run.ledger = std::move(ctx.ledger);
  return run;
}

void dump_ledger(std::ostream& os, const std::vector<LedgerLevel>& ledger) {
  for (const LedgerLevel& lvl : ledger)
    for (auto [child, parent] : lvl.entries)
      os << lvl.level << ' ' << child << ' ' << parent << '\n';
}

}  // namespace meshmsf
