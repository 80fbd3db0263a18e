#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ato/errors.hpp"
#include "ato/lattice.hpp"

namespace ato {

// --- Counter-based pseudo-random stream -------------------------------------
//
// Every draw is a pure function of (seed, index), so a backward event sequence
// can be re-read at any horizon without buffering: the length-T suffix seen at
// horizon T' > T is bit-identical to the stream seen at horizon T. Memory is
// O(1) no matter how far the horizon doubles.

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t counter_u64(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(seed + kGolden * (index + 1));
}

// Uniform in [0, 1), 53-bit resolution.
constexpr double counter_u01(std::uint64_t seed, std::uint64_t index) noexcept {
  return static_cast<double>(counter_u64(seed, index) >> 11) * 0x1.0p-53;
}

// Stream seed for replication `rep` of sweep point `point` under a base seed.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t point, std::uint64_t rep = 0) noexcept {
  return mix64(mix64(base + kGolden * (point + 1)) + kGolden * (rep + 1));
}

// --- Events ------------------------------------------------------------------

enum class EventKind : std::uint8_t {
  demand,              // joint arrival to every available item in `subset`
  service_individual,  // rank-j service layer of item `item` (state-dependent rates)
  service_joint,       // slot-j return scan of item `item` (joint-returns model)
};

struct EventLabel {
  EventKind kind = EventKind::demand;
  ItemMask subset = 0;  // demand only
  int item = -1;        // services only (0-based)
  int level = 0;        // services only, 1-based rank/slot

  bool operator==(const EventLabel&) const = default;

  static EventLabel demand(ItemMask subset) { return EventLabel{EventKind::demand, subset, -1, 0}; }
  static EventLabel service(int item, int level) {
    return EventLabel{EventKind::service_individual, 0, item, level};
  }
  static EventLabel joint_service(int item, int slot) {
    return EventLabel{EventKind::service_joint, 0, item, slot};
  }
};

inline std::string to_string(const EventLabel& e) {
  switch (e.kind) {
    case EventKind::demand:
      return "d" + to_string(e.subset);
    case EventKind::service_individual:
      return "s" + std::to_string(e.item + 1) + "^" + std::to_string(e.level);
    case EventKind::service_joint:
      return "r" + std::to_string(e.item + 1) + "_" + std::to_string(e.level);
  }
  return "?";
}

// Finite event set with its sampling distribution over a uniformized chain.
// Zero-probability events are dropped at construction; probabilities of the
// kept events must sum to 1 within 1e-12.
struct EventAlphabet {
  std::vector<EventLabel> events;
  std::vector<double> probs;
  double uniformization_rate = 0.0;

  std::size_t size() const { return events.size(); }

  // rates are divided by `lambda_total` (the uniformization constant).
  static EventAlphabet from_rates(const std::vector<EventLabel>& labels, const std::vector<double>& rates,
                                  double lambda_total) {
    if (labels.size() != rates.size()) throw ConfigError("event label/rate length mismatch");
    if (!(lambda_total > 0)) throw ConfigError("uniformization rate must be positive");
    EventAlphabet a;
    a.uniformization_rate = lambda_total;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (rates[i] < 0) throw ConfigError("negative event rate");
      if (rates[i] == 0) continue;
      a.events.push_back(labels[i]);
      a.probs.push_back(rates[i] / lambda_total);
    }
    a.check();
    return a;
  }

  void check() const {
    if (events.empty()) throw ConfigError("event alphabet is empty (all rates zero?)");
    double sum = 0;
    for (double p : probs) {
      if (!(p > 0)) throw ConfigError("event probability must be positive");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("event probabilities do not sum to 1");
  }
};

// --- Walker alias table --------------------------------------------------------

// Constant-time discrete sampling. Cell c keeps index c with probability
// keep_[c] and redirects to alias_[c] otherwise, so the uniform-variate mass
// mapped to index e is sum_c (keep_c*[c==e] + (1-keep_c)*[alias_c==e]) / n,
// which the construction makes equal to probs[e].
class AliasSampler {
 public:
  explicit AliasSampler(const std::vector<double>& probs) {
    const std::size_t n = probs.size();
    if (n == 0) throw ConfigError("alias table over empty distribution");
    keep_.assign(n, 1.0);
    alias_.resize(n);
    for (std::size_t i = 0; i < n; ++i) alias_[i] = static_cast<std::uint32_t>(i);

    std::vector<double> scaled(n);
    for (std::size_t i = 0; i < n; ++i) scaled[i] = probs[i] * static_cast<double>(n);
    std::vector<std::uint32_t> small, large;
    small.reserve(n);
    large.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));

    while (!small.empty() && !large.empty()) {
      const std::uint32_t s = small.back();
      small.pop_back();
      const std::uint32_t l = large.back();
      keep_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    // leftovers are pure self-cells up to rounding
  }

  std::size_t size() const { return keep_.size(); }

  std::size_t pick(double u01) const {
    const double v = u01 * static_cast<double>(keep_.size());
    std::size_t c = static_cast<std::size_t>(v);
    if (c >= keep_.size()) c = keep_.size() - 1;
    const double frac = v - static_cast<double>(c);
    return frac < keep_[c] ? c : alias_[c];
  }

  double cell_keep_probability(std::size_t c) const { return keep_[c]; }
  std::size_t cell_alias(std::size_t c) const { return alias_[c]; }

  // Lebesgue mass of [0,1) mapped to index e; equals probs[e] by construction.
  double mapped_mass(std::size_t e) const {
    double m = 0;
    for (std::size_t c = 0; c < keep_.size(); ++c) {
      if (c == e) m += keep_[c];
      if (alias_[c] == e) m += 1.0 - keep_[c];
    }
    return m / static_cast<double>(keep_.size());
  }

 private:
  std::vector<double> keep_;
  std::vector<std::uint32_t> alias_;
};

// --- Replayable backward event stream ------------------------------------------

// at(t) is the event a_{-t}: t = 0 is the last event before time 0, larger t
// reach further into the past. Applying a window of horizon T means applying
// indices T-1 down to 0. Queries are pure in (seed, t).
class EventStream {
 public:
  EventStream(EventAlphabet alphabet, std::uint64_t seed)
      : alphabet_(std::move(alphabet)), sampler_(alphabet_.probs), seed_(seed) {}

  const EventLabel& at(std::uint64_t t) const { return alphabet_.events[index_at(t)]; }
  std::size_t index_at(std::uint64_t t) const { return sampler_.pick(counter_u01(seed_, t)); }

  std::uint64_t seed() const { return seed_; }
  const EventAlphabet& alphabet() const { return alphabet_; }
  const AliasSampler& sampler() const { return sampler_; }

  EventStream reseeded(std::uint64_t seed) const { return EventStream(alphabet_, seed); }

 private:
  EventAlphabet alphabet_;
  AliasSampler sampler_;
  std::uint64_t seed_;
};

}  // namespace ato
