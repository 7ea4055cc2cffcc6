#include "rrm/scan_order.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <utility>

#include "rrm/error.hpp"

namespace rrm {

namespace {

constexpr std::pair<ScanBase, const char*> kBaseNames[] = {
    {ScanBase::HorizontalSerp, "horizontal"},
    {ScanBase::VerticalSerp, "vertical"},
    {ScanBase::DiagTLBR, "diag_tlbr"},
    {ScanBase::DiagTRBL, "diag_trbl"},
};

std::vector<std::size_t> base_sequence(ScanBase base, std::size_t h, std::size_t w) {
  std::vector<std::size_t> seq;
  seq.reserve(h * w);
  switch (base) {
    case ScanBase::HorizontalSerp:
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t k = 0; k < w; ++k) seq.push_back(i * w + (i % 2 == 0 ? k : w - 1 - k));
      }
      break;
    case ScanBase::VerticalSerp:
      for (std::size_t j = 0; j < w; ++j) {
        for (std::size_t k = 0; k < h; ++k) seq.push_back((j % 2 == 0 ? k : h - 1 - k) * w + j);
      }
      break;
    case ScanBase::DiagTLBR:
    case ScanBase::DiagTRBL: {
      const bool mirror = base == ScanBase::DiagTRBL;
      for (std::size_t d = 0; d + 1 < h + w; ++d) {
        const std::size_t lo = d + 1 > w ? d + 1 - w : 0;
        const std::size_t hi = std::min(d, h - 1);
        for (std::size_t k = 0; k <= hi - lo; ++k) {
          const std::size_t i = d % 2 == 0 ? lo + k : hi - k;
          const std::size_t j = d - i;
          seq.push_back(i * w + (mirror ? w - 1 - j : j));
        }
      }
      break;
    }
  }
  return seq;
}

ScanOrder finish(std::vector<std::size_t> order, std::size_t h, std::size_t w) {
  ScanOrder out;
  out.height = h;
  out.width = w;
  out.inverse.assign(order.size(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) out.inverse[order[k]] = k;
  out.order = std::move(order);
  return out;
}

}  // namespace

std::string direction_name(ScanDirection dir) {
  for (const auto& [base, name] : kBaseNames) {
    if (base == dir.base) return std::string(name) + (dir.reversed ? "_rev" : "");
  }
  return "unknown";
}

ScanDirection parse_direction(const std::string& name) {
  std::string stem = name;
  bool reversed = false;
  if (stem.size() > 4 && stem.ends_with("_rev")) {
    reversed = true;
    stem.resize(stem.size() - 4);
  }
  for (const auto& [base, base_name] : kBaseNames) {
    if (stem == base_name) return {base, reversed};
  }
  throw ConfigError("unknown scan direction '" + name +
                    "' (expected horizontal, vertical, diag_tlbr or diag_trbl, optionally with _rev)");
}

ScanOrder build_order(ScanDirection direction, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw ContractError("scan grid extents must be positive");
  auto seq = base_sequence(direction.base, height, width);
  if (direction.reversed) std::reverse(seq.begin(), seq.end());
  return finish(std::move(seq), height, width);
}

std::array<ScanDirection, 8> eight_directions() {
  std::array<ScanDirection, 8> dirs;
  std::size_t k = 0;
  for (ScanBase base : {ScanBase::HorizontalSerp, ScanBase::VerticalSerp, ScanBase::DiagTLBR, ScanBase::DiagTRBL}) {
    dirs[k++] = {base, false};
    dirs[k++] = {base, true};
  }
  return dirs;
}

std::array<ScanOrder, 8> all_eight(std::size_t height, std::size_t width) {
  std::array<ScanOrder, 8> orders;
  const auto dirs = eight_directions();
  for (std::size_t k = 0; k < 8; ++k) orders[k] = build_order(dirs[k], height, width);
  return orders;
}

const std::array<ScanOrder, 8>& cached_orders(std::size_t height, std::size_t width) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<std::array<ScanOrder, 8>>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{height, width}];
  if (!slot) slot = std::make_unique<std::array<ScanOrder, 8>>(all_eight(height, width));
  return *slot;
}

std::vector<std::size_t> direction_subset(std::size_t n) {
  switch (n) {
    case 1: return {0};
    case 2: return {0, 2};
    case 4: return {0, 1, 2, 3};
    case 8: return {0, 1, 2, 3, 4, 5, 6, 7};
    default: throw ConfigError("scan_directions must be 1, 2, 4 or 8, got " + std::to_string(n));
  }
}

ScanOrder raster_order(std::size_t height, std::size_t width) {
  std::vector<std::size_t> seq(height * width);
  for (std::size_t k = 0; k < seq.size(); ++k) seq[k] = k;
  return finish(std::move(seq), height, width);
}

std::size_t max_step(const ScanOrder& order) {
  std::size_t worst = 0;
  for (std::size_t k = 0; k + 1 < order.order.size(); ++k) {
    const auto a = order.order[k], b = order.order[k + 1];
    const auto dr = static_cast<long long>(a / order.width) - static_cast<long long>(b / order.width);
    const auto dc = static_cast<long long>(a % order.width) - static_cast<long long>(b % order.width);
    worst = std::max<std::size_t>(worst, static_cast<std::size_t>(std::max(std::llabs(dr), std::llabs(dc))));
  }
  return worst;
}

bool is_bijection(const ScanOrder& order) {
  const std::size_t n = order.height * order.width;
  if (order.order.size() != n || order.inverse.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (std::size_t v : order.order) {
    if (v >= n || seen[v]) return false;
    seen[v] = true;
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (order.inverse[order.order[k]] != k) return false;
  }
  return true;
}

}  // namespace rrm
