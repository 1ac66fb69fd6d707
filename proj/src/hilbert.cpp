#include "meshmsf/hilbert.hpp"

namespace meshmsf {

namespace {

// Quadrant rotation of the classic iterative conversion. x is the column
// coordinate and y the row coordinate; with that assignment the base case
// comes out as the pinned (0,0),(1,0),(1,1),(0,1) visit order.
void rotate(std::uint64_t n, std::uint64_t& x, std::uint64_t& y, std::uint64_t rx,
            std::uint64_t ry) {
  if (ry == 0) {
    if (rx == 1) {
      x = n - 1 - x;
      y = n - 1 - y;
    }
    std::uint64_t t = x;
    x = y;
    y = t;
  }
}

}  // namespace

std::uint64_t hilbert_rank(Cell p, int side) {
  if (!is_power_of_two(static_cast<std::uint64_t>(side)))
    throw ConfigError("hilbert_rank: side must be a power of 2");
  if (p.row < 0 || p.col < 0 || p.row >= side || p.col >= side)
    throw ContractError("hilbert_rank: cell out of range");
  std::uint64_t x = static_cast<std::uint64_t>(p.col);
  std::uint64_t y = static_cast<std::uint64_t>(p.row);
  std::uint64_t rank = 0;
  for (std::uint64_t s = static_cast<std::uint64_t>(side) / 2; s > 0; s /= 2) {
    std::uint64_t rx = (x & s) > 0 ? 1 : 0;
    std::uint64_t ry = (y & s) > 0 ? 1 : 0;
    rank += s * s * ((3 * rx) ^ ry);
    rotate(s, x, y, rx, ry);
  }
  return rank;
}

Cell hilbert_point(std::uint64_t rank, int side) {
  if (!is_power_of_two(static_cast<std::uint64_t>(side)))
    throw ConfigError("hilbert_point: side must be a power of 2");
  std::uint64_t n = static_cast<std::uint64_t>(side);
  if (rank >= n * n) throw ContractError("hilbert_point: rank out of range");
  std::uint64_t x = 0, y = 0;
  std::uint64_t t = rank;
  for (std::uint64_t s = 1; s < n; s *= 2) {
    std::uint64_t rx = 1 & (t / 2);
    std::uint64_t ry = 1 & (t ^ rx);
    rotate(s, x, y, rx, ry);
    x += s * rx;
    y += s * ry;
    t /= 4;
  }
  return Cell{static_cast<int>(y), static_cast<int>(x)};
}

}  // namespace meshmsf
