#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "ato/errors.hpp"

namespace ato {

// Number of type-i items in replenishment, one coordinate per item type.
using StateX = std::vector<int>;

// Item subsets are one-word bitmasks: bit i set <=> item i (0-based) in the subset.
using ItemMask = std::uint64_t;

inline constexpr int kMaxItems = 63;  // demand subsets must fit one machine word

class CapacityVector {
 public:
  CapacityVector() = default;
  explicit CapacityVector(std::vector<int> caps) : caps_(std::move(caps)) {
    if (caps_.empty() || caps_.size() > static_cast<std::size_t>(kMaxItems))
      throw ConfigError("capacity vector must have between 1 and 63 items");
    for (int c : caps_)
      if (c < 1) throw ConfigError("every capacity must be at least 1");
  }

  int dim() const { return static_cast<int>(caps_.size()); }
  int operator[](int i) const { return caps_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& values() const { return caps_; }
  int total() const {
    int s = 0;
    for (int c : caps_) s += c;
    return s;
  }
  ItemMask all_items() const { return (ItemMask{1} << dim()) - 1; }

  bool contains(const StateX& x) const {
    if (x.size() != caps_.size()) return false;
    for (int i = 0; i < dim(); ++i)
      if (x[static_cast<std::size_t>(i)] < 0 || x[static_cast<std::size_t>(i)] > caps_[static_cast<std::size_t>(i)]) return false;
    return true;
  }

  bool operator==(const CapacityVector&) const = default;

 private:
  std::vector<int> caps_;
};

inline void require_same_dim(const StateX& x, const StateX& y) {
  if (x.size() != y.size()) throw std::invalid_argument("state dimension mismatch");
}

// Product order.
inline bool leq(const StateX& x, const StateX& y) {
  require_same_dim(x, y);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > y[i]) return false;
  return true;
}

inline StateX bottom(const CapacityVector& caps) { return StateX(static_cast<std::size_t>(caps.dim()), 0); }
inline StateX top(const CapacityVector& caps) { return caps.values(); }

inline StateX component_min(const StateX& x, const StateX& y) {
  require_same_dim(x, y);
  StateX r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = std::min(x[i], y[i]);
  return r;
}

inline StateX component_max(const StateX& x, const StateX& y) {
  require_same_dim(x, y);
  StateX r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = std::max(x[i], y[i]);
  return r;
}

// Nonempty product-order interval [lo, hi].
struct IntervalX {
  StateX lo;
  StateX hi;

  bool operator==(const IntervalX&) const = default;
};

inline IntervalX full_interval(const CapacityVector& caps) { return IntervalX{bottom(caps), top(caps)}; }

inline bool is_singleton(const IntervalX& iv) { return iv.lo == iv.hi; }

inline bool interval_contains(const IntervalX& iv, const StateX& x) { return leq(iv.lo, x) && leq(x, iv.hi); }

inline int interval_width_1norm(const IntervalX& iv) {
  int s = 0;
  for (std::size_t i = 0; i < iv.lo.size(); ++i) s += iv.hi[i] - iv.lo[i];
  return s;
}

// Joint arrival with per-item capping: each demanded item below capacity gains one.
inline StateX capped_increment(StateX x, ItemMask subset, const CapacityVector& caps) {
  for (int i = 0; i < caps.dim(); ++i)
    if ((subset >> i) & 1) {
      auto ui = static_cast<std::size_t>(i);
      if (x[ui] < caps[i]) ++x[ui];
    }
  return x;
}

inline std::string to_string(const StateX& x) {
  std::string s = "(";
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(x[i]);
  }
  s += ')';
  return s;
}

// Renders a mask as a 1-based item list, e.g. {0,2} -> "[1,3]".
inline std::string to_string(ItemMask subset) {
  std::string s = "[";
  bool first = true;
  for (int i = 0; i < kMaxItems; ++i)
    if ((subset >> i) & 1) {
      if (!first) s += ',';
      s += std::to_string(i + 1);
      first = false;
    }
  s += ']';
  return s;
}

}  // namespace ato
