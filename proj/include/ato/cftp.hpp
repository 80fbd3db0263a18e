#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "ato/errors.hpp"
#include "ato/events.hpp"
#include "ato/joint.hpp"
#include "ato/lattice.hpp"

namespace ato {

struct CftpOptions {
  std::uint64_t initial_horizon = 1;
  std::uint64_t growth_factor = 2;
  std::uint64_t max_horizon = std::uint64_t{1} << 24;
  bool check_order = false;  // assert lo <= hi after every step
};

// Outcome of one coupling-from-the-past run. `horizon` is the final backward
// window (initial_horizon times a power of the growth factor), `stop_time`
// counts the events applied inside that window before the stop condition
// first held, and `event_draws` counts every event lookup across windows.
struct SamplerReport {
  enum class Kind { exact_state, exact_state_n, interval, subset_size };

  Kind kind = Kind::interval;
  StateX state;
  StateN state_n;
  IntervalX interval;
  std::size_t subset_size = 0;
  std::uint64_t horizon = 0;
  std::uint64_t stop_time = 0;
  std::uint64_t event_draws = 0;
  std::uint64_t seed = 0;
  bool coalesced = false;
};

namespace detail {

inline void check_options(const CftpOptions& opt) {
  if (opt.initial_horizon < 1 || opt.growth_factor < 2 || opt.max_horizon < opt.initial_horizon)
    throw ConfigError("CFTP options require initial_horizon >= 1, growth_factor >= 2, max_horizon >= initial");
}

// Window schedule T, T*f, T*f^2, ... capped at max_horizon.
inline std::optional<std::uint64_t> next_horizon(std::uint64_t t, const CftpOptions& opt) {
  if (t >= opt.max_horizon || t > opt.max_horizon / opt.growth_factor) return std::nullopt;
  return t * opt.growth_factor;
}

}  // namespace detail

// Monotone two-trajectory sampler. `step` must be a monotone transition
// StateX(StateX, EventLabel); whenever the bottom- and top-started
// trajectories meet inside a window, every trajectory has met, and the common
// value at time 0 is an exact stationary sample.
template <typename StepFn>
SamplerReport psa_monotone(const CapacityVector& caps, const EventStream& stream, StepFn&& step,
                           const CftpOptions& opt = {}) {
  detail::check_options(opt);
  SamplerReport rep;
  rep.seed = stream.seed();
  std::uint64_t horizon = opt.initial_horizon;
  for (;;) {
    StateX lo = bottom(caps);
    StateX hi = top(caps);
    bool met = false;
    std::uint64_t met_step = 0;
    for (std::uint64_t i = horizon; i-- > 0;) {
      const EventLabel& e = stream.at(i);
      ++rep.event_draws;
      lo = step(std::move(lo), e);
      if (met) continue;  // single trajectory from here on
      hi = step(std::move(hi), e);
      if (opt.check_order && !leq(lo, hi)) throw ModelError("sandwich order violated: step is not monotone");
      if (lo == hi) {
        met = true;
        met_step = horizon - i;
      }
    }
    rep.horizon = horizon;
    if (met) {
      rep.kind = SamplerReport::Kind::exact_state;
      rep.state = std::move(lo);
      rep.stop_time = met_step;
      rep.coalesced = true;
      return rep;
    }
    if (auto next = detail::next_horizon(horizon, opt)) {
      horizon = *next;
    } else {
      rep.kind = SamplerReport::Kind::interval;
      rep.interval = IntervalX{std::move(lo), std::move(hi)};
      rep.stop_time = horizon;
      rep.coalesced = false;
      return rep;
    }
  }
}

// Envelope sampler for non-monotone chains. `envelope` must map an interval
// and event to an interval containing the image of every enclosed state.
// Stops once the window ends in a singleton; that value is an exact sample.
template <typename EnvelopeFn>
SamplerReport epsa(const CapacityVector& caps, const EventStream& stream, EnvelopeFn&& envelope,
                   const CftpOptions& opt = {}) {
  detail::check_options(opt);
  SamplerReport rep;
  rep.seed = stream.seed();
  std::uint64_t horizon = opt.initial_horizon;
  for (;;) {
    IntervalX iv = full_interval(caps);
    std::uint64_t met_step = 0;
    bool met = false;
    for (std::uint64_t i = horizon; i-- > 0;) {
      iv = envelope(std::move(iv), stream.at(i));
      ++rep.event_draws;
      if (opt.check_order && !leq(iv.lo, iv.hi)) throw ModelError("envelope produced an empty interval");
      if (!met && is_singleton(iv)) {
        met = true;
        met_step = horizon - i;
      }
    }
    rep.horizon = horizon;
    if (is_singleton(iv)) {
      rep.kind = SamplerReport::Kind::exact_state;
      rep.state = iv.lo;
      rep.stop_time = met_step;
      rep.coalesced = true;
      return rep;
    }
    if (auto next = detail::next_horizon(horizon, opt)) {
      horizon = *next;
    } else {
      rep.kind = SamplerReport::Kind::interval;
      rep.interval = std::move(iv);
      rep.stop_time = horizon;
      rep.coalesced = false;
      return rep;
    }
  }
}

namespace detail {

// Shared core of the aggregated-envelope samplers: stop once the window has
// seen the stop condition (whole-interval singleton, or every component met
// at least once), then report the interval at time 0 of that window. The
// component flags persist across horizon doublings; a singleton observed
// mid-window does not pin the interval at time 0, which is why the result is
// an interval around the projection rather than an exact sample.
template <typename EnvelopeFn>
SamplerReport interval_cftp(const CapacityVector& caps, const EventStream& stream, EnvelopeFn&& envelope,
                            bool componentwise, const CftpOptions& opt) {
  detail::check_options(opt);
  SamplerReport rep;
  rep.seed = stream.seed();
  const auto dim = static_cast<std::size_t>(caps.dim());
  std::vector<char> met(dim, 0);
  bool all_met = false;
  std::uint64_t horizon = opt.initial_horizon;
  for (;;) {
    IntervalX iv = full_interval(caps);
    std::uint64_t met_step = 0;
    for (std::uint64_t i = horizon; i-- > 0;) {
      iv = envelope(std::move(iv), stream.at(i));
      ++rep.event_draws;
      if (!all_met) {
        if (componentwise) {
          bool all = true;
          for (std::size_t j = 0; j < dim; ++j) {
            if (iv.lo[j] == iv.hi[j]) met[j] = 1;
            all = all && met[j];
          }
          all_met = all;
        } else {
          all_met = is_singleton(iv);
        }
        if (all_met) met_step = horizon - i;
      }
    }
    rep.horizon = horizon;
    if (all_met) {
      rep.kind = SamplerReport::Kind::interval;
      rep.interval = std::move(iv);
      rep.stop_time = met_step;
      rep.coalesced = true;
      return rep;
    }
    if (auto next = detail::next_horizon(horizon, opt)) {
      horizon = *next;
    } else {
      rep.kind = SamplerReport::Kind::interval;
      rep.interval = std::move(iv);
      rep.stop_time = horizon;
      rep.coalesced = false;
      return rep;
    }
  }
}

}  // namespace detail

// Aggregated-envelope sampler: returns an interval (at time 0) that contains
// the projection of a stationary state, stopping once the envelope collapses
// to a single point anywhere in the window.
inline SamplerReport aepsa(const JointModel& model, const EventStream& stream, const CftpOptions& opt = {}) {
  return detail::interval_cftp(
      model.caps(), stream, [&](IntervalX iv, const EventLabel& e) { return model.agg_envelope(iv, e); },
      /*componentwise=*/false, opt);
}

// Relaxed stopping rule: stop once every component has met at least once
// (flags persist across windows). Never stops later than aepsa on a seed.
inline SamplerReport aepsa_componentwise(const JointModel& model, const EventStream& stream,
                                         const CftpOptions& opt = {}) {
  return detail::interval_cftp(
      model.caps(), stream, [&](IntervalX iv, const EventLabel& e) { return model.agg_envelope(iv, e); },
      /*componentwise=*/true, opt);
}

// Reference subset bounding chain over explicitly enumerated projected states.
// `subset_step` maps (state, event) to the set of possible projected
// successors; the chain unions those images. Exponential in spirit - kept as
// the oracle against which the aggregated envelope is validated.
template <typename SubsetStepFn>
SamplerReport aggregate_subset_cftp(const CapacityVector& caps, const EventStream& stream,
                                    SubsetStepFn&& subset_step, std::vector<StateX> initial_states,
                                    const CftpOptions& opt = {}) {
  if (initial_states.size() > 100'000)
    throw SizeError("subset bounding chain limited to 1e5 enumerated states");
  detail::check_options(opt);
  SamplerReport rep;
  rep.seed = stream.seed();
  std::uint64_t horizon = opt.initial_horizon;
  for (;;) {
    std::vector<StateX> u = initial_states;
    bool met = false;
    std::uint64_t met_step = 0;
    for (std::uint64_t i = horizon; i-- > 0;) {
      const EventLabel& e = stream.at(i);
      ++rep.event_draws;
      std::vector<StateX> next;
      for (const StateX& x : u)
        for (StateX& y : subset_step(x, e)) next.push_back(std::move(y));
      std::sort(next.begin(), next.end());
      next.erase(std::unique(next.begin(), next.end()), next.end());
      u = std::move(next);
      if (!met && u.size() == 1) {
        met = true;
        met_step = horizon - i;
      }
    }
    rep.horizon = horizon;
    rep.subset_size = u.size();
    IntervalX hull{u.front(), u.front()};
    for (const StateX& x : u) {
      hull.lo = component_min(hull.lo, x);
      hull.hi = component_max(hull.hi, x);
    }
    rep.interval = std::move(hull);
    if (met) {
      rep.kind = SamplerReport::Kind::subset_size;
      rep.stop_time = met_step;
      rep.coalesced = true;
      return rep;
    }
    if (auto next = detail::next_horizon(horizon, opt)) {
      horizon = *next;
    } else {
      rep.kind = SamplerReport::Kind::subset_size;
      rep.stop_time = horizon;
      rep.coalesced = false;
      return rep;
    }
  }
}

// Exact sampler for the joint-returns chain. The supremum chain started from
// the full state bounds the projection of every trajectory; when it hits 0 at
// some time -t inside the window, the only possible original state is the
// empty one, so forward-simulating the N-chain from empty over the remaining
// t events yields an exact stationary sample on N. The earliest hit is used:
// the supremum scan stops there and the remaining window is spent forward.
inline SamplerReport exact_joint_sample(const JointModel& model, const EventStream& stream,
                                        const CftpOptions& opt = {}) {
  detail::check_options(opt);
  SamplerReport rep;
  rep.seed = stream.seed();
  const StateX zero = bottom(model.caps());
  std::uint64_t horizon = opt.initial_horizon;
  for (;;) {
    StateX x = top(model.caps());
    std::optional<std::uint64_t> hit;  // backward index of the zero hit
    for (std::uint64_t i = horizon; i-- > 0;) {
      x = model.sup_step(std::move(x), stream.at(i));
      ++rep.event_draws;
      if (x == zero) {
        hit = i;
        break;
      }
    }
    rep.horizon = horizon;
    if (hit) {
      StateN n;
      for (std::uint64_t i = *hit; i-- > 0;) {
        n = model.step_n(n, stream.at(i));
        ++rep.event_draws;
      }
      rep.kind = SamplerReport::Kind::exact_state_n;
      rep.state_n = std::move(n);
      rep.stop_time = horizon - *hit;
      rep.coalesced = true;
      return rep;
    }
    if (auto next = detail::next_horizon(horizon, opt)) {
      horizon = *next;
    } else {
      rep.kind = SamplerReport::Kind::interval;
      rep.interval = IntervalX{zero, std::move(x)};
      rep.stop_time = horizon;
      rep.coalesced = false;
      return rep;
    }
  }
}

// --- Truncated-run interval estimates -------------------------------------------

struct CostIntervalEstimate {
  double lower_mean = 0.0;
  double lower_se = 0.0;
  double upper_mean = 0.0;
  double upper_se = 0.0;
  std::size_t replications = 0;
  std::uint64_t horizon = 0;
  std::size_t coalesced = 0;  // replications whose interval closed by time 0
};

// Fixed-horizon envelope runs: for an increasing cost c, E[c(lo_S)] and
// E[c(hi_S)] bracket the stationary E[c(X)] at every horizon S. Replication r
// uses the stream reseeded with derive_seed(base_seed, 0, r).
template <typename EnvelopeFn, typename CostFn>
CostIntervalEstimate truncated_interval_estimate(const CapacityVector& caps, const EventStream& stream,
                                                 EnvelopeFn&& envelope, CostFn&& cost, std::uint64_t horizon,
                                                 std::size_t replications, std::uint64_t base_seed) {
  CostIntervalEstimate est;
  est.replications = replications;
  est.horizon = horizon;
  double lo_sum = 0, lo_sq = 0, hi_sum = 0, hi_sq = 0;
  for (std::size_t r = 0; r < replications; ++r) {
    EventStream s = stream.reseeded(derive_seed(base_seed, 0, r));
    IntervalX iv = full_interval(caps);
    for (std::uint64_t i = horizon; i-- > 0;) iv = envelope(std::move(iv), s.at(i));
    const double clo = cost(iv.lo);
    const double chi = cost(iv.hi);
    lo_sum += clo;
    lo_sq += clo * clo;
    hi_sum += chi;
    hi_sq += chi * chi;
    if (is_singleton(iv)) ++est.coalesced;
  }
  const auto n = static_cast<double>(replications);
  est.lower_mean = lo_sum / n;
  est.upper_mean = hi_sum / n;
  if (replications > 1) {
    est.lower_se = std::sqrt(std::max(0.0, (lo_sq - n * est.lower_mean * est.lower_mean) / (n - 1)) / n);
    est.upper_se = std::sqrt(std::max(0.0, (hi_sq - n * est.upper_mean * est.upper_mean) / (n - 1)) / n);
  }
  return est;
}

// --- Forward stopping-time measurements ---------------------------------------
//
// For i.i.d. events the forward and backward coalescence times share one
// distribution, and the forward run measures exactly the hitting times the
// analytic bounds control, with no power-of-two window overshoot. Events are
// consumed at increasing indices 0, 1, 2, ...

template <typename StepFn>
std::optional<std::uint64_t> forward_pair_coupling_time(const CapacityVector& caps, const EventStream& stream,
                                                        StepFn&& step, std::uint64_t max_steps) {
  StateX lo = bottom(caps);
  StateX hi = top(caps);
  for (std::uint64_t t = 0; t < max_steps; ++t) {
    if (lo == hi) return t;
    const EventLabel& e = stream.at(t);
    lo = step(std::move(lo), e);
    hi = step(std::move(hi), e);
  }
  return lo == hi ? std::optional<std::uint64_t>{max_steps} : std::nullopt;
}

template <typename EnvelopeFn>
std::optional<std::uint64_t> forward_singleton_time(const CapacityVector& caps, const EventStream& stream,
                                                    EnvelopeFn&& envelope, std::uint64_t max_steps) {
  IntervalX iv = full_interval(caps);
  for (std::uint64_t t = 0; t < max_steps; ++t) {
    if (is_singleton(iv)) return t;
    iv = envelope(std::move(iv), stream.at(t));
  }
  return is_singleton(iv) ? std::optional<std::uint64_t>{max_steps} : std::nullopt;
}

// First time every component of the envelope has met at least once.
template <typename EnvelopeFn>
std::optional<std::uint64_t> forward_all_components_met_time(const CapacityVector& caps, const EventStream& stream,
                                                             EnvelopeFn&& envelope, std::uint64_t max_steps) {
  IntervalX iv = full_interval(caps);
  std::vector<char> met(static_cast<std::size_t>(caps.dim()), 0);
  auto all_met = [&] {
    for (std::size_t j = 0; j < met.size(); ++j) {
      if (iv.lo[j] == iv.hi[j]) met[j] = 1;
      if (!met[j]) return false;
    }
    return true;
  };
  for (std::uint64_t t = 0; t < max_steps; ++t) {
    if (all_met()) return t;
    iv = envelope(std::move(iv), stream.at(t));
  }
  return all_met() ? std::optional<std::uint64_t>{max_steps} : std::nullopt;
}

// First time the supremum chain started from the full state drains to zero.
inline std::optional<std::uint64_t> forward_zero_hit_time(const JointModel& model, const EventStream& stream,
                                                          std::uint64_t max_steps) {
  const StateX zero = bottom(model.caps());
  StateX x = top(model.caps());
  for (std::uint64_t t = 0; t < max_steps; ++t) {
    if (x == zero) return t;
    x = model.sup_step(std::move(x), stream.at(t));
  }
  return x == zero ? std::optional<std::uint64_t>{max_steps} : std::nullopt;
}

}  // namespace ato
