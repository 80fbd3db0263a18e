#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "ato/errors.hpp"
#include "ato/events.hpp"
#include "ato/lattice.hpp"

namespace ato {

struct Demand {
  ItemMask subset = 0;
  double rate = 0.0;
};

// Replenishment-rate specification for one item type.
struct ServiceSpec {
  enum class Kind { single_server, infinite_server, table };
  Kind kind = Kind::single_server;
  double rate = 0.0;          // single/infinite server parameter
  std::vector<double> table;  // table[x] for x = 0..C_i (table kind only)

  static ServiceSpec single_server(double mu) { return ServiceSpec{Kind::single_server, mu, {}}; }
  static ServiceSpec infinite_server(double mu) { return ServiceSpec{Kind::infinite_server, mu, {}}; }
  static ServiceSpec from_table(std::vector<double> t) { return ServiceSpec{Kind::table, 0.0, std::move(t)}; }

  std::vector<double> expand(int capacity) const {
    std::vector<double> mu(static_cast<std::size_t>(capacity) + 1, 0.0);
    switch (kind) {
      case Kind::single_server:
        for (int x = 1; x <= capacity; ++x) mu[static_cast<std::size_t>(x)] = rate;
        break;
      case Kind::infinite_server:
        for (int x = 1; x <= capacity; ++x) mu[static_cast<std::size_t>(x)] = rate * x;
        break;
      case Kind::table:
        if (table.size() != mu.size()) throw ConfigError("service table must list rates for x = 0..C_i");
        mu = table;
        break;
    }
    if (mu[0] != 0.0) throw ConfigError("service rate at level 0 must be 0");
    for (double v : mu)
      if (v < 0) throw ConfigError("negative service rate");
    return mu;
  }
};

inline void check_demands(const std::vector<Demand>& demands, const CapacityVector& caps) {
  const ItemMask all = caps.all_items();
  for (const Demand& d : demands) {
    if (d.subset == 0) throw ConfigError("demand subset must be non-empty");
    if (d.subset & ~all) throw ConfigError("demand subset " + to_string(d.subset) + " references unknown items");
    if (d.rate < 0) throw ConfigError("negative demand rate");
  }
}

// ATO system with individual, state-dependent replenishments.
//
// The uniformized chain is driven by demand events d_A (probability
// lambda_A / Lambda) and layered service events s_i^(j) whose probabilities
// are the increments of mu_i along the permutation of {0..C_i} that sorts
// service rates ascending. Layer j serves exactly the states x with
// mu_i(x_i) >= mu_i at rank j; zero-increment layers (rate ties) carry no
// probability and are dropped.
class IndividualModel {
 public:
  IndividualModel(CapacityVector caps, std::vector<Demand> demands, std::vector<ServiceSpec> service)
      : caps_(std::move(caps)), demands_(std::move(demands)) {
    const int n = caps_.dim();
    if (service.size() != static_cast<std::size_t>(n))
      throw ConfigError("expected one service spec per item type");
    check_demands(demands_, caps_);

    lambda_ = 0.0;
    for (const Demand& d : demands_) lambda_ += d.rate;
    if (!(lambda_ > 0)) throw ConfigError("at least one demand rate must be positive");

    mu_.resize(static_cast<std::size_t>(n));
    level_at_rank_.resize(static_cast<std::size_t>(n));
    beta_.assign(static_cast<std::size_t>(n), 0.0);
    lambda_item_.assign(static_cast<std::size_t>(n), 0.0);

    for (int i = 0; i < n; ++i) {
      auto ui = static_cast<std::size_t>(i);
      mu_[ui] = service[ui].expand(caps_[i]);
      // stable ascending sort of {0..C_i} by service rate; ties keep level order
      std::vector<int>& order = level_at_rank_[ui];
      order.resize(static_cast<std::size_t>(caps_[i]) + 1);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return mu_[ui][static_cast<std::size_t>(a)] < mu_[ui][static_cast<std::size_t>(b)]; });
      beta_[ui] = mu_[ui][static_cast<std::size_t>(order.back())];
    }

    for (const Demand& d : demands_)
      for (int i = 0; i < n; ++i)
        if ((d.subset >> i) & 1) lambda_item_[static_cast<std::size_t>(i)] += d.rate;

    Lambda_ = lambda_;
    for (double b : beta_) Lambda_ += b;

    std::vector<EventLabel> labels;
    std::vector<double> rates;
    for (const Demand& d : demands_) {
      labels.push_back(EventLabel::demand(d.subset));
      rates.push_back(d.rate);
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 1; j <= caps_[i]; ++j) {
        const double inc = rate_at_rank(i, j) - rate_at_rank(i, j - 1);
        labels.push_back(EventLabel::service(i, j));
        rates.push_back(inc);
      }
    }
    alphabet_ = EventAlphabet::from_rates(labels, rates, Lambda_);
  }

  const CapacityVector& caps() const { return caps_; }
  int item_count() const { return caps_.dim(); }
  const std::vector<Demand>& demands() const { return demands_; }
  const EventAlphabet& alphabet() const { return alphabet_; }
  double uniformization_rate() const { return Lambda_; }
  double total_demand_rate() const { return lambda_; }

  double service_rate(int item, int level) const { return mu_[static_cast<std::size_t>(item)][static_cast<std::size_t>(level)]; }
  // mu_i at the j-th rank of the ascending ordering (rank 0 has rate 0).
  double rate_at_rank(int item, int rank) const {
    return mu_[static_cast<std::size_t>(item)][static_cast<std::size_t>(level_at_rank_[static_cast<std::size_t>(item)][static_cast<std::size_t>(rank)])];
  }
  double item_demand_rate(int item) const { return lambda_item_[static_cast<std::size_t>(item)]; }
  double max_service_rate(int item) const { return beta_[static_cast<std::size_t>(item)]; }

  // alpha_i = min over occupied levels; eta_i = max over interior levels (0 when C_i = 1).
  double min_positive_level_rate(int item) const {
    auto ui = static_cast<std::size_t>(item);
    double m = mu_[ui][1];
    for (int x = 2; x <= caps_[item]; ++x) m = std::min(m, mu_[ui][static_cast<std::size_t>(x)]);
    return m;
  }
  double max_interior_level_rate(int item) const {
    auto ui = static_cast<std::size_t>(item);
    double m = 0.0;
    for (int x = 1; x < caps_[item]; ++x) m = std::max(m, mu_[ui][static_cast<std::size_t>(x)]);
    return m;
  }

  // Partial order service: each demanded item below capacity is shipped.
  StateX step_pos(StateX x, const EventLabel& e) const {
    if (e.kind == EventKind::demand) return capped_increment(std::move(x), e.subset, caps_);
    const auto ui = static_cast<std::size_t>(e.item);
    if (mu_[ui][static_cast<std::size_t>(x[ui])] >= rate_at_rank(e.item, e.level)) --x[ui];
    return x;
  }

  // Total order service: the demand ships only if every demanded item is available.
  StateX step_tos(StateX x, const EventLabel& e) const {
    if (e.kind != EventKind::demand) return step_pos(std::move(x), e);
    for (int i = 0; i < caps_.dim(); ++i)
      if (((e.subset >> i) & 1) && x[static_cast<std::size_t>(i)] >= caps_[i]) return x;
    for (int i = 0; i < caps_.dim(); ++i)
      if ((e.subset >> i) & 1) ++x[static_cast<std::size_t>(i)];
    return x;
  }

  // Tight interval hull of {step_tos(x, e) : x in [m, M]}, in O(I) per event.
  // Services and one-item demands are monotone, so their envelope is the pair
  // of endpoint images. A multi-item demand splits on where capacity blocks:
  // no endpoint coordinate at capacity shifts the whole interval; a blocked
  // lower endpoint freezes it; otherwise only upper coordinates move, and the
  // lower endpoint moves exactly when a single coordinate is top-blocked.
  IntervalX envelope_tos(const IntervalX& iv, const EventLabel& e) const {
    if (e.kind != EventKind::demand || single_item(e.subset))
      return IntervalX{step_tos(iv.lo, e), step_tos(iv.hi, e)};

    const int n = caps_.dim();
    int blocked_hi = 0;          // demanded coords with M_i = C_i
    int blocked_hi_item = -1;
    bool blocked_lo = false;     // some demanded coord with m_i = C_i
    for (int i = 0; i < n; ++i) {
      if (!((e.subset >> i) & 1)) continue;
      const auto ui = static_cast<std::size_t>(i);
      if (iv.lo[ui] >= caps_[i]) blocked_lo = true;
      if (iv.hi[ui] >= caps_[i]) {
        ++blocked_hi;
        blocked_hi_item = i;
      }
    }
    if (blocked_lo) return iv;
    if (blocked_hi == 0)
      return IntervalX{capped_increment(iv.lo, e.subset, caps_), capped_increment(iv.hi, e.subset, caps_)};

    IntervalX out = iv;
    out.hi = capped_increment(std::move(out.hi), e.subset, caps_);
    if (blocked_hi == 1) ++out.lo[static_cast<std::size_t>(blocked_hi_item)];
    return out;
  }

  // Expected-steps bound for the coupling time of the POS two-trajectory run.
  // Per item, the drift argument needs either demand-starved (lambda_i <
  // alpha_i) or demand-saturated (lambda_i > eta_i) behaviour; items meeting
  // neither make the bound inapplicable.
  std::optional<double> bound_pos_coupling() const {
    double sum = 0.0;
    for (int i = 0; i < caps_.dim(); ++i) {
      const double li = item_demand_rate(i);
      const double alpha = min_positive_level_rate(i);
      const double eta = max_interior_level_rate(i);
      if (li > eta)
        sum += caps_[i] / (li - eta);
      else if (li < alpha)
        sum += caps_[i] / (alpha - li);
      else
        return std::nullopt;
    }
    return Lambda_ * sum;
  }

  // min over x != 0 of total service rate, minus total per-item demand rate.
  // Rates depend on the item's own coordinate only, so the minimizing state
  // has a single occupied coordinate.
  double tos_drift_margin() const {
    double min_service = min_positive_level_rate(0);
    for (int i = 1; i < caps_.dim(); ++i) min_service = std::min(min_service, min_positive_level_rate(i));
    double sum_lambda_i = 0.0;
    for (int i = 0; i < caps_.dim(); ++i) sum_lambda_i += item_demand_rate(i);
    return min_service - sum_lambda_i;
  }

  // Expected-steps bound for the TOS coupling time via the POS hitting time of 0.
  std::optional<double> bound_tos_coupling() const {
    const double delta = tos_drift_margin();
    if (!(delta > 0)) return std::nullopt;
    return Lambda_ * caps_.total() / delta;
  }

 private:
  static bool single_item(ItemMask m) { return m != 0 && (m & (m - 1)) == 0; }

  CapacityVector caps_;
  std::vector<Demand> demands_;
  std::vector<std::vector<double>> mu_;      // mu_[i][x]
  std::vector<std::vector<int>> level_at_rank_;
  std::vector<double> beta_;
  std::vector<double> lambda_item_;
  double lambda_ = 0.0;
  double Lambda_ = 0.0;
  EventAlphabet alphabet_;
};

}  // namespace ato
