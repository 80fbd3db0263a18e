#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ato/errors.hpp"
#include "ato/events.hpp"
#include "ato/individual.hpp"
#include "ato/lattice.hpp"

namespace ato {

// Outstanding joint orders: subset -> strictly positive count. Absent keys are
// zero. Valid states keep, for every item i, sum over keys containing i at or
// below C_i.
struct StateN {
  std::map<ItemMask, int> counts;

  bool empty() const { return counts.empty(); }
  int count_of(ItemMask subset) const {
    auto it = counts.find(subset);
    return it == counts.end() ? 0 : it->second;
  }
  void add(ItemMask subset, int delta) {
    auto it = counts.find(subset);
    if (it == counts.end()) {
      if (delta != 0) counts.emplace(subset, delta);
      return;
    }
    it->second += delta;
    if (it->second == 0) counts.erase(it);
  }

  bool operator==(const StateN&) const = default;
  bool operator<(const StateN& o) const { return counts < o.counts; }
};

inline StateX project(const StateN& n, int item_count) {
  StateX x(static_cast<std::size_t>(item_count), 0);
  for (const auto& [subset, count] : n.counts)
    for (int i = 0; i < item_count; ++i)
      if ((subset >> i) & 1) x[static_cast<std::size_t>(i)] += count;
  return x;
}

inline std::string to_string(const StateN& n) {
  if (n.counts.empty()) return "{}";
  std::string s = "{";
  bool first = true;
  for (const auto& [subset, count] : n.counts) {
    if (!first) s += ',';
    s += to_string(subset) + ":" + std::to_string(count);
    first = false;
  }
  s += '}';
  return s;
}

// --- Scan order for return events ---------------------------------------------
//
// Return slot r^i_j serves the j-th outstanding order among subsets whose
// smallest item is i, scanned in a fixed order over those subsets: rank k
// enumerates the subsets of {i..I-1} containing i, where bit t of k (counted
// from the most significant of I-1-i bits) excludes item i+t. Rank 0 is the
// full tail set {i..I-1}; the last rank is the singleton {i}.

inline ItemMask subset_at_rank(int item_count, int item, std::uint64_t rank) {
  const int width = item_count - 1 - item;
  if (item < 0 || item >= item_count || rank >= (std::uint64_t{1} << width))
    throw std::invalid_argument("subset rank out of range");
  ItemMask mask = ItemMask{1} << item;
  for (int s = item + 1; s < item_count; ++s) {
    const int t = s - item;  // 1-based bit position from the MSB
    const std::uint64_t bit = (rank >> (width - t)) & 1;
    if (bit == 0) mask |= ItemMask{1} << s;
  }
  return mask;
}

// Inverse of subset_at_rank for masks whose smallest item is `item`.
inline std::uint64_t rank_of_subset(int item_count, int item, ItemMask mask) {
  const int width = item_count - 1 - item;
  std::uint64_t rank = 0;
  for (int s = item + 1; s < item_count; ++s) {
    const int t = s - item;
    if (((mask >> s) & 1) == 0) rank |= std::uint64_t{1} << (width - t);
  }
  return rank;
}

// ATO-POS with joint returns (service-tools model). Every outstanding order
// returns as a whole after an exponential time of rate mu, so the chain lives
// on N; the projected per-item totals live on X and are what the aggregated
// envelope bounds.
class JointModel {
 public:
  JointModel(CapacityVector caps, std::vector<Demand> demands, double mu)
      : caps_(std::move(caps)), demands_(std::move(demands)), mu_(mu) {
    check_demands(demands_, caps_);
    if (!(mu_ > 0)) throw ConfigError("joint return rate mu must be positive");
    lambda_ = 0.0;
    for (const Demand& d : demands_) lambda_ += d.rate;
    if (!(lambda_ > 0)) throw ConfigError("at least one demand rate must be positive");
    Lambda_ = lambda_ + mu_ * caps_.total();

    std::vector<EventLabel> labels;
    std::vector<double> rates;
    for (const Demand& d : demands_) {
      labels.push_back(EventLabel::demand(d.subset));
      rates.push_back(d.rate);
    }
    for (int i = 0; i < caps_.dim(); ++i)
      for (int j = 1; j <= caps_[i]; ++j) {
        labels.push_back(EventLabel::joint_service(i, j));
        rates.push_back(mu_);
      }
    alphabet_ = EventAlphabet::from_rates(labels, rates, Lambda_);
  }

  const CapacityVector& caps() const { return caps_; }
  int item_count() const { return caps_.dim(); }
  const std::vector<Demand>& demands() const { return demands_; }
  double return_rate() const { return mu_; }
  double total_demand_rate() const { return lambda_; }
  double uniformization_rate() const { return Lambda_; }
  const EventAlphabet& alphabet() const { return alphabet_; }

  double item_demand_rate(int item) const {
    double s = 0.0;
    for (const Demand& d : demands_)
      if ((d.subset >> item) & 1) s += d.rate;
    return s;
  }

  StateX project(const StateN& n) const { return ato::project(n, caps_.dim()); }

  // Demand d_A ships the available part of A as one order; return r^i_j scans
  // the outstanding orders led by item i in rank order and removes the one
  // holding slot j, if any.
  StateN step_n(const StateN& n, const EventLabel& e) const {
    StateN out = n;
    if (e.kind == EventKind::demand) {
      const StateX x = project(n);
      ItemMask shipped = 0;
      for (int i = 0; i < caps_.dim(); ++i)
        if (((e.subset >> i) & 1) && x[static_cast<std::size_t>(i)] < caps_[i]) shipped |= ItemMask{1} << i;
      if (shipped != 0) out.add(shipped, +1);
      return out;
    }
    // collect keys led by e.item, sorted by scan rank
    std::vector<std::tuple<std::uint64_t, ItemMask, int>> led;
    for (const auto& [subset, count] : n.counts)
      if (std::countr_zero(subset) == e.item)
        led.emplace_back(rank_of_subset(caps_.dim(), e.item, subset), subset, count);
    std::sort(led.begin(), led.end());
    int cumulative = 0;
    for (const auto& [rank, subset, count] : led) {
      cumulative += count;
      if (cumulative >= e.level) {
        out.add(subset, -1);
        return out;
      }
    }
    return out;  // fewer than j outstanding orders led by this item
  }

  // One-step maximum of the projected image over all states with projection x.
  // Demands project like the individual POS arrival. Return r^i_j can lower
  // coordinate i in every preimage only when j slots are forced to be led by
  // item i, i.e. j <= max(x_i - (x_0 + .. + x_{i-1}), 0).
  StateX sup_step(StateX x, const EventLabel& e) const {
    if (e.kind == EventKind::demand) return capped_increment(std::move(x), e.subset, caps_);
    int prefix = 0;
    for (int p = 0; p < e.item; ++p) prefix += x[static_cast<std::size_t>(p)];
    const int forced = std::max(x[static_cast<std::size_t>(e.item)] - prefix, 0);
    if (e.level <= forced) --x[static_cast<std::size_t>(e.item)];
    return x;
  }

  // One-step minimum of the projected image over all states with projection x.
  StateX inf_step(StateX x, const EventLabel& e) const {
    if (e.kind == EventKind::demand) return capped_increment(std::move(x), e.subset, caps_);
    const int i = e.item, j = e.level;
    StateX out = x;
    if (j <= x[static_cast<std::size_t>(i)]) --out[static_cast<std::size_t>(i)];
    int tail = 0;  // x_{i+1} + ... + x_p
    for (int p = i + 1; p < caps_.dim(); ++p) {
      tail += x[static_cast<std::size_t>(p)];
      if (x[static_cast<std::size_t>(p)] > 0 && j <= std::min(tail, x[static_cast<std::size_t>(i)])) --out[static_cast<std::size_t>(p)];
    }
    return out;
  }

  // Aggregated envelope transition: tight one-step bounds on the projected
  // process over every preimage of every state in [m, M]. The upper end rides
  // the (monotone) supremum chain of M; the lower end is the interval minimum
  // of the infimum chain, in closed form per coordinate.
  IntervalX agg_envelope(const IntervalX& iv, const EventLabel& e) const {
    if (e.kind == EventKind::demand)
      return IntervalX{capped_increment(iv.lo, e.subset, caps_), capped_increment(iv.hi, e.subset, caps_)};
    const int i = e.item, j = e.level;
    IntervalX out{iv.lo, sup_step(iv.hi, e)};
    if (j <= out.lo[static_cast<std::size_t>(i)]) --out.lo[static_cast<std::size_t>(i)];
    int upper_gap = 0;  // M_{i+1} + ... + M_{p-1}
    for (int p = i + 1; p < caps_.dim(); ++p) {
      const auto up = static_cast<std::size_t>(p);
      if (iv.lo[up] > 0 && j <= std::min(upper_gap + iv.lo[up], iv.hi[static_cast<std::size_t>(i)])) --out.lo[up];
      upper_gap += iv.hi[up];
    }
    return out;
  }

  // Expected-steps bound for the componentwise stopping rule under a split of
  // the items into a demand-starved block (upper envelope must drain to 0) and
  // a demand-saturated block (lower envelope must fill to capacity), with the
  // starved block scanned first. Returns nothing when the drift conditions
  // fail for this split/order.
  std::optional<double> bound_componentwise_stop(const std::vector<int>& starved,
                                                 const std::vector<int>& saturated) const {
    std::vector<char> seen(static_cast<std::size_t>(caps_.dim()), 0);
    for (int i : starved) seen[static_cast<std::size_t>(i)] = 1;
    for (int i : saturated) {
      if (seen[static_cast<std::size_t>(i)]) throw std::invalid_argument("item split is not a partition");
      seen[static_cast<std::size_t>(i)] = 1;
    }
    for (char s : seen)
      if (!s) throw std::invalid_argument("item split is not a partition");

    double starved_lambda = 0.0;
    double starved_caps = 0.0;
    for (int i : starved) {
      starved_lambda += item_demand_rate(i);
      starved_caps += caps_[i];
    }
    double bound = 0.0;
    if (!starved.empty()) {
      if (!(mu_ > starved_lambda)) return std::nullopt;
      bound += Lambda_ / (mu_ - starved_lambda) * starved_caps;
    }
    double cap_prefix = starved_caps;
    for (int p : saturated) {
      cap_prefix += caps_[p];
      const double delta = item_demand_rate(p) - mu_ * (cap_prefix - 1);
      if (!(delta > 0)) return std::nullopt;
      bound += Lambda_ / delta * caps_[p];
    }
    return bound;
  }

  struct PartitionBound {
    double bound = 0.0;
    std::vector<int> starved;
    std::vector<int> saturated;  // in scan order
  };

  // Searches all splits (and scan orders of the saturated block when small)
  // for the smallest applicable componentwise-stop bound.
  std::optional<PartitionBound> best_componentwise_stop_bound() const {
    const int n = caps_.dim();
    if (n > 16) throw SizeError("partition search limited to 16 item types");
    std::optional<PartitionBound> best;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      std::vector<int> starved, saturated;
      for (int i = 0; i < n; ++i) ((mask >> i) & 1 ? starved : saturated).push_back(i);
      std::vector<std::vector<int>> orders;
      if (saturated.size() <= 7) {
        std::vector<int> perm = saturated;
        do
          orders.push_back(perm);
        while (std::next_permutation(perm.begin(), perm.end()));
      } else {
        orders.push_back(saturated);
      }
      for (const auto& order : orders) {
        const auto b = bound_componentwise_stop(starved, order);
        if (b && (!best || *b < best->bound)) best = PartitionBound{*b, starved, order};
      }
    }
    return best;
  }

  // Expected-steps bound for full coalescence on N in the high-service-rate
  // regime (mu above the total per-item demand rate).
  std::optional<double> bound_high_service_rate() const {
    double sum_lambda_i = 0.0;
    for (int i = 0; i < caps_.dim(); ++i) sum_lambda_i += item_demand_rate(i);
    if (!(mu_ > sum_lambda_i)) return std::nullopt;
    return Lambda_ * caps_.total() / (mu_ - sum_lambda_i);
  }

 private:
  CapacityVector caps_;
  std::vector<Demand> demands_;
  double mu_ = 0.0;
  double lambda_ = 0.0;
  double Lambda_ = 0.0;
  EventAlphabet alphabet_;
};

}  // namespace ato
