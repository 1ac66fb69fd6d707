#pragma once

#include <cstdint>

#include "meshmsf/words.hpp"

namespace meshmsf {

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
};

// Hilbert curve over a side x side grid, side a power of 2.
//
// Orientation is pinned so the side-2 curve visits (0,0),(1,0),(1,1),(0,1)
// in rank order 0..3; larger sides follow the standard U-shape rotation
// recursion. rank and point are exact inverses.
std::uint64_t hilbert_rank(Cell p, int side);
Cell hilbert_point(std::uint64_t rank, int side);

inline bool is_power_of_two(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace meshmsf
