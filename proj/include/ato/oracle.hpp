#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "ato/cftp.hpp"
#include "ato/errors.hpp"
#include "ato/events.hpp"
#include "ato/joint.hpp"
#include "ato/lattice.hpp"

namespace ato {

inline constexpr std::size_t kEnumerationGuard = 1'000'000;

inline std::vector<StateX> enumerate_states(const CapacityVector& caps) {
  std::size_t count = 1;
  for (int i = 0; i < caps.dim(); ++i) {
    count *= static_cast<std::size_t>(caps[i]) + 1;
    if (count > kEnumerationGuard) throw SizeError("projected state space exceeds enumeration guard");
  }
  std::vector<StateX> states;
  states.reserve(count);
  StateX x = bottom(caps);
  for (;;) {
    states.push_back(x);
    int i = caps.dim() - 1;
    while (i >= 0 && x[static_cast<std::size_t>(i)] == caps[i]) x[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) break;
    ++x[static_cast<std::size_t>(i)];
  }
  return states;
}

// All non-empty subsets of any demanded subset: arrivals ship the available
// part of a demand, so these are exactly the keys a reachable state can hold.
inline std::vector<ItemMask> demand_support_closure(const std::vector<Demand>& demands) {
  std::vector<ItemMask> keys;
  for (const Demand& d : demands) {
    if (d.rate <= 0) continue;
    ItemMask sub = d.subset;
    for (;;) {
      if (sub != 0) keys.push_back(sub);
      if (sub == 0) break;
      sub = (sub - 1) & d.subset;
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

inline std::vector<ItemMask> all_subset_keys(int item_count) {
  std::vector<ItemMask> keys;
  for (ItemMask m = 1; m < (ItemMask{1} << item_count); ++m) keys.push_back(m);
  return keys;
}

// Complete enumeration of joint states whose keys are restricted to `keys`,
// respecting every per-item capacity constraint.
inline std::vector<StateN> enumerate_joint_states(const CapacityVector& caps, const std::vector<ItemMask>& keys) {
  std::vector<StateN> states;
  StateN current;
  StateX usage = bottom(caps);

  auto max_count = [&](ItemMask key) {
    int room = std::numeric_limits<int>::max();
    for (int i = 0; i < caps.dim(); ++i)
      if ((key >> i) & 1) room = std::min(room, caps[i] - usage[static_cast<std::size_t>(i)]);
    return room;
  };

  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == keys.size()) {
      states.push_back(current);
      if (states.size() > kEnumerationGuard) throw SizeError("joint state space exceeds enumeration guard");
      return;
    }
    const ItemMask key = keys[k];
    const int room = max_count(key);
    for (int c = 0; c <= room; ++c) {
      if (c > 0) {
        current.add(key, +1);
        for (int i = 0; i < caps.dim(); ++i)
          if ((key >> i) & 1) ++usage[static_cast<std::size_t>(i)];
      }
      rec(k + 1);
    }
    if (room > 0) {
      current.add(key, -room);
      for (int i = 0; i < caps.dim(); ++i)
        if ((key >> i) & 1) usage[static_cast<std::size_t>(i)] -= room;
    }
  };
  rec(0);
  return states;
}

inline std::vector<StateN> enumerate_joint_states(const JointModel& model) {
  return enumerate_joint_states(model.caps(), demand_support_closure(model.demands()));
}

// Groups an enumerated joint space by projection, for brute-force preimage scans.
class PreimageIndex {
 public:
  PreimageIndex(const CapacityVector& caps, std::vector<ItemMask> keys)
      : states_(enumerate_joint_states(caps, keys)), dim_(caps.dim()) {
    for (std::size_t k = 0; k < states_.size(); ++k) buckets_[project(states_[k], dim_)].push_back(k);
  }

  const std::vector<StateN>& states() const { return states_; }
  const std::vector<std::size_t>& preimage(const StateX& x) const {
    static const std::vector<std::size_t> empty;
    auto it = buckets_.find(x);
    return it == buckets_.end() ? empty : it->second;
  }

 private:
  std::vector<StateN> states_;
  int dim_;
  std::map<StateX, std::vector<std::size_t>> buckets_;
};

// psi(f(S_x, a)): projected one-step image over every preimage of x.
inline std::vector<StateX> projected_image(const JointModel& model, const PreimageIndex& index, const StateX& x,
                                           const EventLabel& e) {
  std::vector<StateX> out;
  for (std::size_t k : index.preimage(x)) out.push_back(model.project(model.step_n(index.states()[k], e)));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// --- Dense ground-truth chain ----------------------------------------------------

struct DenseChain {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;  // row-stochastic transition matrix

  std::size_t size() const { return rows.size(); }
};

// P(x, y) = sum of probabilities of the events mapping x to y.
template <typename State, typename StepFn, typename RenderFn>
DenseChain build_chain(const std::vector<State>& states, const EventAlphabet& alphabet, StepFn&& step,
                       RenderFn&& render) {
  std::map<State, std::size_t> index;
  for (std::size_t k = 0; k < states.size(); ++k) index.emplace(states[k], k);
  DenseChain chain;
  chain.labels.reserve(states.size());
  for (const State& s : states) chain.labels.push_back(render(s));
  chain.rows.assign(states.size(), std::vector<double>(states.size(), 0.0));
  for (std::size_t k = 0; k < states.size(); ++k)
    for (std::size_t a = 0; a < alphabet.size(); ++a) {
      const State next = step(states[k], alphabet.events[a]);
      const auto it = index.find(next);
      if (it == index.end()) throw ModelError("transition leaves the enumerated state space");
      chain.rows[k][it->second] += alphabet.probs[a];
    }
  return chain;
}

namespace detail {

inline void check_irreducible(const DenseChain& chain) {
  const std::size_t n = chain.size();
  auto reach = [&](bool transpose) {
    std::vector<char> seen(n, 0);
    std::deque<std::size_t> queue{0};
    seen[0] = 1;
    while (!queue.empty()) {
      const std::size_t k = queue.front();
      queue.pop_front();
      for (std::size_t j = 0; j < n; ++j) {
        const double p = transpose ? chain.rows[j][k] : chain.rows[k][j];
        if (p > 0 && !seen[j]) {
          seen[j] = 1;
          queue.push_back(j);
        }
      }
    }
    return seen;
  };
  const auto fwd = reach(false);
  const auto bwd = reach(true);
  for (std::size_t k = 0; k < n; ++k)
    if (!fwd[k] || !bwd[k])
      throw ModelError("chain is reducible: state " + chain.labels[k] + " is not in the recurrent class of " +
                       chain.labels[0]);
}

// Dense solve of pi (P - I) = 0 with the normalization replacing one equation.
inline std::vector<double> solve_stationary_direct(const DenseChain& chain) {
  const std::size_t n = chain.size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t col = 0; col < n; ++col)
    for (std::size_t row = 0; row < n; ++row) a[col][row] = chain.rows[row][col] - (row == col ? 1.0 : 0.0);
  for (std::size_t row = 0; row < n; ++row) a[n - 1][row] = 1.0;  // sum pi = 1
  a[n - 1][n] = 1.0;

  for (std::size_t c = 0; c < n; ++c) {
    std::size_t pivot = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[pivot][c])) pivot = r;
    std::swap(a[c], a[pivot]);
    if (a[c][c] == 0.0) throw ModelError("singular system while solving for the stationary distribution");
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> pi(n);
  for (std::size_t c = 0; c < n; ++c) pi[c] = a[c][n] / a[c][c];
  return pi;
}

}  // namespace detail

// Stationary distribution: power iteration to 1e-12, direct solve as a
// fallback for slowly mixing chains. Requires irreducibility; aperiodicity
// comes from the self-loops the uniformization leaves everywhere.
inline std::vector<double> stationary(const DenseChain& chain) {
  const std::size_t n = chain.size();
  if (n == 0) throw ModelError("empty chain");
  detail::check_irreducible(chain);

  std::vector<double> pi(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n, 0.0);
  bool converged = false;
  for (std::size_t iter = 0; iter < 1'000'000 && !converged; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const double w = pi[k];
      if (w == 0.0) continue;
      const auto& row = chain.rows[k];
      for (std::size_t j = 0; j < n; ++j) next[j] += w * row[j];
    }
    double diff = 0.0;
    for (std::size_t j = 0; j < n; ++j) diff = std::max(diff, std::abs(next[j] - pi[j]));
    pi.swap(next);
    converged = diff <= 1e-12;
  }
  if (!converged) pi = detail::solve_stationary_direct(chain);

  double sum = 0.0;
  for (double& p : pi) {
    if (p < 0 && p > -1e-12) p = 0.0;
    sum += p;
  }
  for (double& p : pi) p /= sum;

  double residual = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double pj = 0.0;
    for (std::size_t k = 0; k < n; ++k) pj += pi[k] * chain.rows[k][j];
    residual = std::max(residual, std::abs(pj - pi[j]));
  }
  if (residual > 1e-10) throw ModelError("stationary solve failed to reach residual 1e-10");
  return pi;
}

// --- Empirical-distribution checks ---------------------------------------------

inline double tv_distance(const std::vector<double>& empirical, const std::vector<double>& pi) {
  if (empirical.size() != pi.size()) throw std::invalid_argument("distribution support mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < pi.size(); ++k) s += std::abs(empirical[k] - pi[k]);
  return 0.5 * s;
}

inline std::vector<double> normalize_counts(const std::vector<std::uint64_t>& counts) {
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  std::vector<double> p(counts.size(), 0.0);
  if (total > 0)
    for (std::size_t k = 0; k < counts.size(); ++k) p[k] = static_cast<double>(counts[k]) / total;
  return p;
}

struct ChiSquareResult {
  double statistic = 0.0;
  std::size_t cells = 0;  // after pooling
  double p_value = 1.0;
};

// Pearson goodness-of-fit with pooling: consecutive cells are merged until the
// expected count reaches 5, the tail merges into the last pooled cell.
inline ChiSquareResult chi_square(const std::vector<std::uint64_t>& counts, const std::vector<double>& pi) {
  if (counts.size() != pi.size()) throw std::invalid_argument("distribution support mismatch");
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);

  std::vector<std::pair<double, double>> pooled;  // (actual, expected)
  double actual = 0.0, expected = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    actual += static_cast<double>(counts[k]);
    expected += pi[k] * total;
    if (expected >= 5.0) {
      pooled.emplace_back(actual, expected);
      actual = expected = 0.0;
    }
  }
  if (expected > 0.0) {
    if (pooled.empty()) {
      pooled.emplace_back(actual, expected);
    } else {
      pooled.back().first += actual;
      pooled.back().second += expected;
    }
  }

  ChiSquareResult r;
  r.cells = pooled.size();
  if (pooled.size() < 2) return r;  // single cell: nothing to test
  for (const auto& [a, e] : pooled) r.statistic += (a - e) * (a - e) / e;
  const boost::math::chi_squared dist(static_cast<double>(pooled.size() - 1));
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

// Truncated-run verdict: the oracle mean must lie within three standard errors
// of the estimated bracket.
inline bool check_cost_bounds(const CostIntervalEstimate& est, double oracle_mean) {
  return est.lower_mean - 3.0 * est.lower_se <= oracle_mean && oracle_mean <= est.upper_mean + 3.0 * est.upper_se;
}

}  // namespace ato
