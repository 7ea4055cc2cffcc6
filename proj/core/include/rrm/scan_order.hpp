#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace rrm {

enum class ScanBase { HorizontalSerp, VerticalSerp, DiagTLBR, DiagTRBL };

struct ScanDirection {
  ScanBase base = ScanBase::HorizontalSerp;
  bool reversed = false;

  friend bool operator==(const ScanDirection&, const ScanDirection&) = default;
};

/// "horizontal", "vertical", "diag_tlbr", "diag_trbl", with a "_rev" suffix when reversed.
std::string direction_name(ScanDirection dir);
ScanDirection parse_direction(const std::string& name);

/// Visit order over an H x W grid and its inverse permutation.
///
/// order[k] is the flat index (row * W + col) visited at step k, and
/// inverse[order[k]] == k. Consecutive visits are always 8-neighbours.
struct ScanOrder {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::size_t> order;
  std::vector<std::size_t> inverse;
};

/// Builds one continuity-preserving order.
///
/// HorizontalSerp walks rows top to bottom, alternating left-to-right and
/// right-to-left; VerticalSerp does the same over columns. DiagTLBR walks
/// anti-diagonals d = i + j in increasing d, with increasing i on even d and
/// decreasing i on odd d. Each diagonal then ends on a grid edge next to where
/// the following one starts: an even diagonal ends at its largest row, which is
/// either the bottom row (the next diagonal starts one column to the right) or
/// row d (the next starts at row d + 1, same column); odd diagonals are the
/// mirror case. DiagTRBL is DiagTLBR on column-flipped coordinates. A reversed
/// direction is the exact reversal of its base sequence.
ScanOrder build_order(ScanDirection direction, std::size_t height, std::size_t width);

/// Fixed enumeration used by the eight-way merge:
/// (HorizontalSerp, VerticalSerp, DiagTLBR, DiagTRBL) x (forward, reversed),
/// base-major, so index 2 b + r is base b with reversal r.
std::array<ScanDirection, 8> eight_directions();
std::array<ScanOrder, 8> all_eight(std::size_t height, std::size_t width);

/// Cached all_eight for a grid size; the returned reference stays valid for the
/// life of the process. Safe to call concurrently.
const std::array<ScanOrder, 8>& cached_orders(std::size_t height, std::size_t width);

/// Direction indices (into eight_directions) used when only n directions are
/// enabled: 1 -> horizontal; 2 -> horizontal, vertical; 4 -> both plus their
/// reversals; 8 -> all. Throws ConfigError for other n.
std::vector<std::size_t> direction_subset(std::size_t n);

/// Plain raster order (row by row, always left to right); a non-continuous reference.
ScanOrder raster_order(std::size_t height, std::size_t width);

/// Largest Chebyshev step between consecutive visits.
std::size_t max_step(const ScanOrder& order);
bool is_bijection(const ScanOrder& order);

}  // namespace rrm
