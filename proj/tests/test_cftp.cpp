#include "ato/cftp.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "ato/individual.hpp"
#include "ato/joint.hpp"
#include "ato/oracle.hpp"
#include "ato/stats.hpp"

namespace ato {
namespace {

std::vector<Demand> all_subset_demands(int items, double base = 1.0) {
  std::vector<Demand> out;
  for (ItemMask m = 1; m < (ItemMask{1} << items); ++m)
    out.push_back(Demand{m, base / static_cast<double>(1 << (std::popcount(m) - 1))});
  return out;
}

EventAlphabet one_event_alphabet() {
  return EventAlphabet::from_rates({EventLabel::demand(0b1)}, {1.0}, 1.0);
}

TEST(Psa, OneStepAbsorptionCoalescesImmediately) {
  const CapacityVector caps({3, 3});
  const EventStream stream(one_event_alphabet(), 5);
  const auto rep = psa_monotone(caps, stream, [&](StateX, const EventLabel&) { return bottom(caps); });
  EXPECT_EQ(rep.kind, SamplerReport::Kind::exact_state);
  EXPECT_TRUE(rep.coalesced);
  EXPECT_EQ(rep.horizon, 1u);
  EXPECT_EQ(rep.stop_time, 1u);
  EXPECT_EQ(rep.state, bottom(caps));
}

TEST(Psa, IdentityStepHitsTheHorizonCap) {
  const CapacityVector caps({2, 2});
  const EventStream stream(one_event_alphabet(), 5);
  CftpOptions opt;
  opt.max_horizon = 8;
  const auto rep = psa_monotone(caps, stream, [](StateX x, const EventLabel&) { return x; }, opt);
  EXPECT_EQ(rep.kind, SamplerReport::Kind::interval);
  EXPECT_FALSE(rep.coalesced);
  EXPECT_EQ(rep.horizon, 8u);
  EXPECT_EQ(rep.interval, full_interval(caps));
}

TEST(Psa, RejectsDegenerateOptions) {
  const CapacityVector caps({2});
  const EventStream stream(one_event_alphabet(), 5);
  auto id = [](StateX x, const EventLabel&) { return x; };
  CftpOptions opt;
  opt.initial_horizon = 0;
  EXPECT_THROW(psa_monotone(caps, stream, id, opt), ConfigError);
  opt = CftpOptions{};
  opt.growth_factor = 1;
  EXPECT_THROW(psa_monotone(caps, stream, id, opt), ConfigError);
}

TEST(Psa, OrderCheckDetectsNonMonotoneStep) {
  const CapacityVector caps({2, 2});
  const EventStream stream(one_event_alphabet(), 5);
  CftpOptions opt;
  opt.check_order = true;
  auto bad_step = [&](StateX x, const EventLabel&) -> StateX {
    if (x == bottom(caps)) return {1, 0};
    return {0, 1};
  };
  EXPECT_THROW(psa_monotone(caps, stream, bad_step, opt), ModelError);
}

TEST(Psa, MatchesTruncatedGeometricOracle) {
  // M/M/1/C with lambda != mu; closed-form birth-death solution as the oracle
  const double lambda = 1.0, mu = 2.0;
  const int cap = 3;
  IndividualModel m(CapacityVector({cap}), {{0b1, lambda}}, {ServiceSpec::single_server(mu)});
  auto step = [&](StateX x, const EventLabel& e) { return m.step_pos(std::move(x), e); };

  std::vector<std::uint64_t> counts(static_cast<std::size_t>(cap) + 1, 0);
  const std::size_t runs = 100'000;
  EventStream stream(m.alphabet(), 0);
  for (std::size_t r = 0; r < runs; ++r) {
    const auto rep = psa_monotone(m.caps(), stream.reseeded(derive_seed(101, 0, r)), step);
    ASSERT_TRUE(rep.coalesced);
    ++counts[static_cast<std::size_t>(rep.state[0])];
  }

  const double rho = lambda / mu;
  std::vector<double> pi(static_cast<std::size_t>(cap) + 1);
  double norm = 0;
  for (int k = 0; k <= cap; ++k) norm += std::pow(rho, k);
  for (int k = 0; k <= cap; ++k) pi[static_cast<std::size_t>(k)] = std::pow(rho, k) / norm;

  EXPECT_LE(tv_distance(normalize_counts(counts), pi), 0.01);
  EXPECT_GT(chi_square(counts, pi).p_value, 0.01);
}

TEST(Psa, RerunBeyondCoalescenceIsInvariant) {
  IndividualModel m(CapacityVector({3, 3}), all_subset_demands(2, 0.3),
                    {ServiceSpec::single_server(1.0), ServiceSpec::single_server(1.0)});
  auto step = [&](StateX x, const EventLabel& e) { return m.step_pos(std::move(x), e); };
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const EventStream stream(m.alphabet(), derive_seed(7, 0, seed));
    const auto rep = psa_monotone(m.caps(), stream, step);
    ASSERT_TRUE(rep.coalesced);
    EXPECT_EQ(rep.event_draws, 2 * rep.horizon - 1);  // geometric window series
    // the failed window pins the true coupling time above horizon/2, so the
    // doubling scheme spends at most four times that many draws
    EXPECT_LE(rep.event_draws, 4 * std::max<std::uint64_t>(rep.horizon / 2, 1));
    CftpOptions opt;
    opt.initial_horizon = 2 * rep.horizon;
    const auto rep2 = psa_monotone(m.caps(), stream, step, opt);
    ASSERT_TRUE(rep2.coalesced);
    EXPECT_EQ(rep2.state, rep.state);
  }
}

TEST(Epsa, EndpointEnvelopeOfMonotoneStepMatchesPsa) {
  IndividualModel m(CapacityVector({2, 3}), all_subset_demands(2, 0.5),
                    {ServiceSpec::infinite_server(0.8), ServiceSpec::single_server(1.1)});
  auto step = [&](StateX x, const EventLabel& e) { return m.step_pos(std::move(x), e); };
  auto env = [&](IntervalX iv, const EventLabel& e) {
    return IntervalX{m.step_pos(std::move(iv.lo), e), m.step_pos(std::move(iv.hi), e)};
  };
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const EventStream stream(m.alphabet(), derive_seed(13, 0, seed));
    const auto a = psa_monotone(m.caps(), stream, step);
    const auto b = epsa(m.caps(), stream, env);
    ASSERT_TRUE(a.coalesced);
    ASSERT_TRUE(b.coalesced);
    EXPECT_EQ(a.state, b.state);
    EXPECT_EQ(a.horizon, b.horizon);
    EXPECT_EQ(a.stop_time, b.stop_time);
  }
}

TEST(Epsa, SingletonStopImpliesGrandCoupling) {
  IndividualModel m(CapacityVector({2, 2}), all_subset_demands(2, 0.4),
                    {ServiceSpec::single_server(1.0), ServiceSpec::single_server(1.0)});
  auto env = [&](IntervalX iv, const EventLabel& e) { return m.envelope_tos(iv, e); };
  const auto states = enumerate_states(m.caps());
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const EventStream stream(m.alphabet(), derive_seed(21, 0, seed));
    const auto rep = epsa(m.caps(), stream, env);
    ASSERT_TRUE(rep.coalesced);
    for (const StateX& x0 : states) {
      StateX x = x0;
      for (std::uint64_t i = rep.horizon; i-- > 0;) x = m.step_tos(std::move(x), stream.at(i));
      ASSERT_EQ(x, rep.state);
    }
  }
}

JointModel quiet_joint() {
  return JointModel(CapacityVector({2, 2}), {{0b01, 0.2}, {0b10, 0.2}, {0b11, 0.2}}, 2.0);
}

struct JointOracle {
  std::vector<StateN> states;
  std::vector<double> pi;
  std::vector<double> mean_proj;  // oracle mean of each projected coordinate
  double mean_jobs = 0;

  explicit JointOracle(const JointModel& m) : states(enumerate_joint_states(m)) {
    const DenseChain chain = build_chain(states, m.alphabet(),
                                         [&](const StateN& n, const EventLabel& e) { return m.step_n(n, e); },
                                         [](const StateN& n) { return to_string(n); });
    pi = stationary(chain);
    mean_proj.assign(static_cast<std::size_t>(m.item_count()), 0.0);
    for (std::size_t k = 0; k < states.size(); ++k) {
      const StateX x = m.project(states[k]);
      for (std::size_t j = 0; j < mean_proj.size(); ++j) mean_proj[j] += pi[k] * x[j];
    }
    for (double v : mean_proj) mean_jobs += v;
  }
};

TEST(Aepsa, IntervalBracketsOracleProjectedMean) {
  const JointModel m = quiet_joint();
  const JointOracle oracle(m);
  const std::size_t reps = 5000;
  std::vector<std::vector<double>> lo_vals(2), hi_vals(2);
  EventStream stream(m.alphabet(), 0);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto rep = aepsa(m, stream.reseeded(derive_seed(3, 0, r)));
    ASSERT_TRUE(rep.coalesced);
    ASSERT_TRUE(leq(rep.interval.lo, rep.interval.hi));
    for (std::size_t j = 0; j < 2; ++j) {
      lo_vals[j].push_back(rep.interval.lo[j]);
      hi_vals[j].push_back(rep.interval.hi[j]);
    }
  }
  for (std::size_t j = 0; j < 2; ++j) {
    const auto lo = summarize(lo_vals[j]);
    const auto hi = summarize(hi_vals[j]);
    EXPECT_LE(lo.mean - 3 * lo.se, oracle.mean_proj[j]);
    EXPECT_GE(hi.mean + 3 * hi.se, oracle.mean_proj[j]);
  }
}

TEST(Aepsa, CostBoundsBracketOracleMean) {
  const JointModel m = quiet_joint();
  const JointOracle oracle(m);
  std::vector<double> lo_vals, hi_vals;
  EventStream stream(m.alphabet(), 0);
  for (std::size_t r = 0; r < 10'000; ++r) {
    const auto rep = aepsa(m, stream.reseeded(derive_seed(4, 0, r)));
    double lo = 0, hi = 0;
    for (std::size_t j = 0; j < 2; ++j) {
      lo += rep.interval.lo[j];
      hi += rep.interval.hi[j];
    }
    lo_vals.push_back(lo);
    hi_vals.push_back(hi);
  }
  const auto lo = summarize(lo_vals);
  const auto hi = summarize(hi_vals);
  EXPECT_LE(lo.mean - 3 * lo.se, oracle.mean_jobs);
  EXPECT_GE(hi.mean + 3 * hi.se, oracle.mean_jobs);
}

TEST(Aepsa, RerunBeyondStopIsInvariant) {
  const JointModel m = quiet_joint();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const EventStream stream(m.alphabet(), derive_seed(9, 0, seed));
    const auto rep = aepsa(m, stream);
    ASSERT_TRUE(rep.coalesced);
    CftpOptions opt;
    opt.initial_horizon = 2 * rep.horizon;
    const auto rep2 = aepsa(m, stream, opt);
    ASSERT_TRUE(rep2.coalesced);
    EXPECT_EQ(rep2.interval, rep.interval);
  }
}

TEST(AepsaComponentwise, NeverStopsLaterThanWholeIntervalStop) {
  const JointModel m = quiet_joint();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const EventStream stream(m.alphabet(), derive_seed(11, 0, seed));
    const auto whole = aepsa(m, stream);
    const auto part = aepsa_componentwise(m, stream);
    ASSERT_TRUE(whole.coalesced && part.coalesced);
    EXPECT_TRUE(part.horizon < whole.horizon ||
                (part.horizon == whole.horizon && part.stop_time <= whole.stop_time));
    EXPECT_TRUE(leq(part.interval.lo, part.interval.hi));
  }
}

TEST(AepsaComponentwise, MeanStopTimesStayCloseOnTheWideInstance) {
  // I=5, C_i=10, demand rate halving with subset size, returns at rho = 0.5
  const int items = 5;
  std::vector<Demand> demands = all_subset_demands(items, 1.0);
  double lambda_item = 0;
  for (const Demand& d : demands)
    if (d.subset & 1) lambda_item += d.rate;
  const JointModel m(CapacityVector(std::vector<int>(items, 10)), demands, lambda_item / 0.5);
  auto env = [&](IntervalX iv, const EventLabel& e) { return m.agg_envelope(iv, e); };
  std::vector<double> whole_times, part_times;
  EventStream stream(m.alphabet(), 0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const EventStream s = stream.reseeded(derive_seed(15, 0, seed));
    const auto whole = forward_singleton_time(m.caps(), s, env, 1 << 20);
    const auto part = forward_all_components_met_time(m.caps(), s, env, 1 << 20);
    ASSERT_TRUE(whole && part);
    ASSERT_LE(*part, *whole);
    whole_times.push_back(static_cast<double>(*whole));
    part_times.push_back(static_cast<double>(*part));
  }
  const double mean_whole = summarize(whole_times).mean;
  const double mean_part = summarize(part_times).mean;
  EXPECT_LE(mean_whole, 2.0 * mean_part);
}

TEST(SubsetChain, StaysInsideTheAggregatedEnvelope) {
  const JointModel m(CapacityVector({2, 2, 2}), all_subset_demands(3, 0.4), 0.7);
  const PreimageIndex index(m.caps(), demand_support_closure(m.demands()));
  auto subset_step = [&](const StateX& x, const EventLabel& e) { return projected_image(m, index, x, e); };

  const auto all_states = enumerate_states(m.caps());
  EventStream stream(m.alphabet(), 12);
  std::vector<StateX> u = all_states;  // after zero events the subset is all of X
  IntervalX iv = full_interval(m.caps());
  std::size_t interval_coarser_than_subset = 0;
  for (std::uint64_t t = 0; t < 500; ++t) {
    const EventLabel& e = stream.at(t);
    std::vector<StateX> next;
    for (const StateX& x : u)
      for (const StateX& y : subset_step(x, e)) next.push_back(y);
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    u = std::move(next);
    iv = m.agg_envelope(iv, e);
    for (const StateX& x : u) ASSERT_TRUE(interval_contains(iv, x));
    if (is_singleton(iv)) {
      ASSERT_EQ(u.size(), 1u);
    }
    std::size_t enclosed = 0;
    for (const StateX& x : all_states) enclosed += interval_contains(iv, x);
    if (enclosed > u.size()) ++interval_coarser_than_subset;
  }
  // the subset gives strictly more information than its interval hull
  EXPECT_GT(interval_coarser_than_subset, 0u);
}

TEST(SubsetChain, ReferenceSamplerStopsNoLaterThanAepsa) {
  const JointModel m = quiet_joint();
  const PreimageIndex index(m.caps(), demand_support_closure(m.demands()));
  auto subset_step = [&](const StateX& x, const EventLabel& e) { return projected_image(m, index, x, e); };
  const auto initial = enumerate_states(m.caps());
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const EventStream stream(m.alphabet(), derive_seed(23, 0, seed));
    const auto subset = aggregate_subset_cftp(m.caps(), stream, subset_step, initial);
    const auto envelope = aepsa(m, stream);
    ASSERT_TRUE(subset.coalesced && envelope.coalesced);
    EXPECT_EQ(subset.kind, SamplerReport::Kind::subset_size);
    // the subset is reported at time 0 and may have re-opened past the
    // mid-window singleton that triggered the stop
    EXPECT_GE(subset.subset_size, 1u);
    EXPECT_TRUE(interval_contains(envelope.interval, subset.interval.lo));
    EXPECT_TRUE(interval_contains(envelope.interval, subset.interval.hi));
    EXPECT_TRUE(subset.horizon < envelope.horizon ||
                (subset.horizon == envelope.horizon && subset.stop_time <= envelope.stop_time));
  }
}

JointModel hsr_joint() {
  return JointModel(CapacityVector({2, 2}), {{0b01, 0.1}, {0b10, 0.1}, {0b11, 0.1}}, 1.0);
}

TEST(ExactJoint, MatchesOracleOnTheFullJointSpace) {
  const JointModel m = hsr_joint();
  const JointOracle oracle(m);
  std::map<StateN, std::size_t> index;
  for (std::size_t k = 0; k < oracle.states.size(); ++k) index.emplace(oracle.states[k], k);

  std::vector<std::uint64_t> counts(oracle.states.size(), 0);
  std::vector<double> stops;
  EventStream stream(m.alphabet(), 0);
  const std::size_t runs = 30'000;
  for (std::size_t r = 0; r < runs; ++r) {
    const auto rep = exact_joint_sample(m, stream.reseeded(derive_seed(77, 0, r)));
    ASSERT_TRUE(rep.coalesced);
    ++counts[index.at(rep.state_n)];
    stops.push_back(static_cast<double>(rep.stop_time));
  }
  EXPECT_LE(tv_distance(normalize_counts(counts), oracle.pi), 0.03);

  const auto bound = m.bound_high_service_rate();
  ASSERT_TRUE(bound);
  EXPECT_LE(summarize(stops).upper99(), *bound);
}

TEST(ExactJoint, AgreesWithAManualReplay) {
  const JointModel m = hsr_joint();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const EventStream stream(m.alphabet(), derive_seed(31, 0, seed));
    const auto rep = exact_joint_sample(m, stream);
    ASSERT_TRUE(rep.coalesced);

    // independent replay: find the earliest zero hit of the supremum chain in
    // the final window and simulate the joint chain forward from empty
    StateX x = top(m.caps());
    std::optional<std::uint64_t> hit;
    for (std::uint64_t i = rep.horizon; i-- > 0;) {
      x = m.sup_step(std::move(x), stream.at(i));
      if (x == bottom(m.caps())) {
        hit = i;
        break;
      }
    }
    ASSERT_TRUE(hit);
    StateN n;
    EXPECT_EQ(project(n, 2), bottom(m.caps()));  // the hit pins the empty state
    for (std::uint64_t i = *hit; i-- > 0;) n = m.step_n(n, stream.at(i));
    EXPECT_EQ(n, rep.state_n);
    EXPECT_EQ(rep.stop_time, rep.horizon - *hit);
  }
}

TEST(TruncatedEstimate, HorizonZeroGivesTheExtremeCosts) {
  IndividualModel m(CapacityVector({3, 3}), all_subset_demands(2, 0.3),
                    {ServiceSpec::single_server(1.0), ServiceSpec::single_server(1.0)});
  auto env = [&](IntervalX iv, const EventLabel& e) { return m.envelope_tos(iv, e); };
  auto cost = [](const StateX& x) { return static_cast<double>(x[0] + x[1]); };
  const EventStream stream(m.alphabet(), 1);
  const auto est = truncated_interval_estimate(m.caps(), stream, env, cost, 0, 100, 55);
  EXPECT_DOUBLE_EQ(est.lower_mean, 0.0);
  EXPECT_DOUBLE_EQ(est.upper_mean, 6.0);
  EXPECT_DOUBLE_EQ(est.lower_se, 0.0);
  EXPECT_DOUBLE_EQ(est.upper_se, 0.0);
}

TEST(TruncatedEstimate, BracketsTheOracleAcrossHorizons) {
  IndividualModel m(CapacityVector({3, 3}), all_subset_demands(2, 0.3),
                    {ServiceSpec::single_server(1.0), ServiceSpec::single_server(1.0)});
  const auto states = enumerate_states(m.caps());
  const DenseChain chain = build_chain(states, m.alphabet(),
                                       [&](const StateX& x, const EventLabel& e) { return m.step_tos(x, e); },
                                       [](const StateX& x) { return to_string(x); });
  const auto pi = stationary(chain);
  double oracle_mean = 0;
  for (std::size_t k = 0; k < states.size(); ++k) oracle_mean += pi[k] * (states[k][0] + states[k][1]);

  auto env = [&](IntervalX iv, const EventLabel& e) { return m.envelope_tos(iv, e); };
  auto cost = [](const StateX& x) { return static_cast<double>(x[0] + x[1]); };
  const EventStream stream(m.alphabet(), 1);
  for (const std::uint64_t horizon : {std::uint64_t{0}, std::uint64_t{3}, std::uint64_t{10}, std::uint64_t{60}}) {
    const auto est = truncated_interval_estimate(m.caps(), stream, env, cost, horizon, 3000, 60 + horizon);
    EXPECT_TRUE(check_cost_bounds(est, oracle_mean)) << "horizon " << horizon;
  }
  // long horizons coalesce every replication: the bracket collapses
  const auto est = truncated_interval_estimate(m.caps(), stream, env, cost, 4096, 300, 7);
  EXPECT_EQ(est.coalesced, est.replications);
  EXPECT_DOUBLE_EQ(est.lower_mean, est.upper_mean);
  EXPECT_TRUE(check_cost_bounds(est, oracle_mean));
}

}  // namespace
}  // namespace ato
