#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace meshmsf {

// One machine word. A word holds one vertex label, weight, rank, or flag set.
using Word = std::uint64_t;

inline constexpr Word kNullWord = ~Word{0};

// Capacity limits chosen so an edge provenance triple (min endpoint, max
// endpoint, input index) packs into a single word whose integer order equals
// the lexicographic order of the triple.
inline constexpr Word kLabelLimit = Word{1} << 21;   // vertex labels
inline constexpr Word kEdgeLimit = Word{1} << 22;    // input edge indices
inline constexpr Word kWeightLimit = Word{1} << 60;  // edge weights

inline constexpr Word kSelfLoopIndex = kEdgeLimit - 1;  // synthetic origin slot

inline Word pack_origin(Word lo, Word hi, Word index) {
  return (lo << 43) | (hi << 22) | index;
}

inline Word origin_lo(Word origin) { return origin >> 43; }
inline Word origin_hi(Word origin) { return (origin >> 22) & (kLabelLimit - 1); }
inline Word origin_index(Word origin) { return origin & (kEdgeLimit - 1); }

// Record kinds resident in processor slots. Everything the pipeline moves is
// one of these, so the simulator deals in a single fixed-width record.
enum class Kind : Word {
  Null = 0,       // empty slot / padding
  Edge = 1,       // weighted (super)edge, endpoints in f0/f1
  SelfLoop = 2,   // (v,v) marker guaranteeing v is represented
  Vertex = 3,     // tree-labeling vertex state (v, ptr, arb neighbor)
  Proposal = 4,   // per-vertex candidate during min-edge selection
  Copy = 5,       // transient lookup/query copy
  Result = 6,     // selected MSF edge, inert passenger
};

// Flag bits stored in the meta word next to the kind.
inline constexpr Word kFlagSelectedA = Word{1} << 8;
inline constexpr Word kFlagSelectedB = Word{1} << 9;
inline constexpr Word kFlagSegMin = Word{1} << 10;
inline constexpr Word kFlagSource = Word{1} << 11;
inline constexpr Word kFlagNotFound = Word{1} << 12;
inline constexpr Word kFlagRoute = Word{1} << 13;
inline constexpr Word kFlagPending = Word{1} << 14;  // result awaits a combine
inline constexpr Word kFlagDirRole = Word{1} << 15;  // copy acts as directory
inline constexpr Word kFlagFinished = Word{1} << 16;
inline constexpr Word kFlagMarker = Word{1} << 17;
inline constexpr Word kFlagWinner = Word{1} << 18;
inline constexpr Word kFlagTmpA = Word{1} << 19;

// Fixed wire width of one record: four data words, one auxiliary word and one
// meta word. Moving a record across a link therefore costs kRecordWords steps.
inline constexpr int kRecordWords = 6;

struct Record {
  // f[0..3]: kind-specific payload. aux: scratch (saved rank, neighbor).
  std::array<Word, 4> f{kNullWord, kNullWord, kNullWord, kNullWord};
  Word aux = kNullWord;
  Word meta = static_cast<Word>(Kind::Null);

  Kind kind() const { return static_cast<Kind>(meta & 0xff); }
  void set_kind(Kind k) { meta = (meta & ~Word{0xff}) | static_cast<Word>(k); }
  bool is_null() const { return kind() == Kind::Null; }
  bool flag(Word bit) const { return (meta & bit) != 0; }
  void set_flag(Word bit, bool on = true) {
    if (on)
      meta |= bit;
    else
      meta &= ~bit;
  }

  bool operator==(const Record&) const = default;
};

inline Record null_record() { return Record{}; }

// Edge accessors: f0 = endpoint a, f1 = endpoint b, f2 = weight, f3 = origin.
inline Record make_edge(Word a, Word b, Word w, Word origin) {
  Record r;
  r.set_kind(Kind::Edge);
  r.f = {a, b, w, origin};
  return r;
}

inline Record make_self_loop(Word v) {
  Record r;
  r.set_kind(Kind::SelfLoop);
  r.f = {v, v, 0, pack_origin(v, v, kSelfLoopIndex)};
  return r;
}

// Error taxonomy. The CLI maps these onto its exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InternalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace meshmsf
