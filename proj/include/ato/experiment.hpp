#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ato/cftp.hpp"
#include "ato/config.hpp"
#include "ato/oracle.hpp"
#include "ato/stats.hpp"

namespace ato {

struct ReplicationRow {
  std::size_t sweep_index = 0;
  std::optional<double> sweep_value;
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  std::uint64_t stop_time = 0;
  std::uint64_t horizon = 0;
  bool coalesced = false;
  double jobs_lo = 0.0;  // total jobs of the sample (interval ends coincide for exact samples)
  double jobs_hi = 0.0;
  int interval_width = 0;
  std::string sample;
};

struct SweepSummary {
  std::optional<double> sweep_value;
  std::size_t replications = 0;
  std::size_t non_coalesced = 0;
  SummaryStat stop_time;
  SummaryStat horizon;
  SummaryStat jobs_lo;
  SummaryStat jobs_hi;
  SummaryStat interval_width;
  std::optional<double> bound_pos;
  std::optional<double> bound_tos;
  std::optional<double> bound_componentwise;
  std::optional<double> bound_high_service;
  std::optional<double> tv_vs_oracle;
};

struct ExperimentResult {
  ExperimentConfig config;
  SamplerKind sampler = SamplerKind::psa;
  std::vector<ReplicationRow> rows;
  std::vector<SweepSummary> summaries;
};

namespace detail {

inline double total_jobs(const StateX& x) {
  double s = 0;
  for (int v : x) s += v;
  return s;
}

template <typename Fn>
void parallel_for(std::size_t count, int parallelism, Fn&& body) {
  unsigned workers = parallelism > 0 ? static_cast<unsigned>(parallelism) : std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t k = next.fetch_add(1);
        if (k >= count) return;
        body(k);
      }
    });
  for (auto& t : pool) t.join();
}

inline void fill_row_from_report(ReplicationRow& row, const SamplerReport& rep, int item_count) {
  row.seed = rep.seed;
  row.stop_time = rep.stop_time;
  row.horizon = rep.horizon;
  row.coalesced = rep.coalesced;
  switch (rep.kind) {
    case SamplerReport::Kind::exact_state:
      row.jobs_lo = row.jobs_hi = total_jobs(rep.state);
      row.interval_width = 0;
      row.sample = to_string(rep.state);
      break;
    case SamplerReport::Kind::exact_state_n: {
      const StateX x = project(rep.state_n, item_count);
      row.jobs_lo = row.jobs_hi = total_jobs(x);
      row.interval_width = 0;
      row.sample = to_string(rep.state_n);
      break;
    }
    case SamplerReport::Kind::interval:
    case SamplerReport::Kind::subset_size:
      row.jobs_lo = total_jobs(rep.interval.lo);
      row.jobs_hi = total_jobs(rep.interval.hi);
      row.interval_width = interval_width_1norm(rep.interval);
      row.sample = "[" + to_string(rep.interval.lo) + ";" + to_string(rep.interval.hi) + "]";
      break;
  }
}

inline std::optional<double> tv_against_oracle(const ExperimentConfig& cfg, const BuiltModels& models,
                                               const std::vector<SamplerReport>& reports) {
  if (cfg.model == ModelKind::pos_joint) {
    const auto states = enumerate_joint_states(*models.joint);
    std::map<StateN, std::size_t> index;
    for (std::size_t k = 0; k < states.size(); ++k) index.emplace(states[k], k);
    DenseChain chain = build_chain(states, models.joint->alphabet(),
                                   [&](const StateN& n, const EventLabel& e) { return models.joint->step_n(n, e); },
                                   [](const StateN& n) { return to_string(n); });
    const auto pi = stationary(chain);
    std::vector<std::uint64_t> counts(states.size(), 0);
    for (const auto& rep : reports) {
      if (rep.kind != SamplerReport::Kind::exact_state_n) return std::nullopt;
      ++counts[index.at(rep.state_n)];
    }
    return tv_distance(normalize_counts(counts), pi);
  }

  const auto states = enumerate_states(CapacityVector(cfg.caps));
  std::map<StateX, std::size_t> index;
  for (std::size_t k = 0; k < states.size(); ++k) index.emplace(states[k], k);
  const auto& model = *models.individual;
  auto step = [&](const StateX& x, const EventLabel& e) {
    return cfg.model == ModelKind::pos_individual ? model.step_pos(x, e) : model.step_tos(x, e);
  };
  DenseChain chain = build_chain(states, model.alphabet(), step, [](const StateX& x) { return to_string(x); });
  const auto pi = stationary(chain);
  std::vector<std::uint64_t> counts(states.size(), 0);
  for (const auto& rep : reports) {
    if (rep.kind != SamplerReport::Kind::exact_state) return std::nullopt;
    ++counts[index.at(rep.state)];
  }
  return tv_distance(normalize_counts(counts), pi);
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult result;
  result.config = cfg;
  result.sampler = cfg.effective_sampler();
  for (const std::string& d : validate_config(cfg))
    if (d.rfind("error", 0) == 0) throw ConfigError(d);

  std::vector<std::optional<double>> points;
  if (cfg.sweep_values.empty()) {
    points.push_back(std::nullopt);
  } else {
    for (double v : cfg.sweep_values) points.emplace_back(v);
  }

  CftpOptions opt;
  opt.max_horizon = cfg.max_horizon;

  for (std::size_t sp = 0; sp < points.size(); ++sp) {
    const BuiltModels models = build_models(cfg, points[sp]);
    std::vector<SamplerReport> reports(cfg.replications);

    detail::parallel_for(cfg.replications, cfg.parallelism, [&](std::size_t r) {
      const std::uint64_t seed = derive_seed(cfg.seed, sp, r);
      switch (result.sampler) {
        case SamplerKind::psa: {
          const auto& m = *models.individual;
          EventStream stream(m.alphabet(), seed);
          reports[r] = psa_monotone(m.caps(), stream,
                                    [&](StateX x, const EventLabel& e) { return m.step_pos(std::move(x), e); }, opt);
          break;
        }
        case SamplerKind::epsa: {
          const auto& m = *models.individual;
          EventStream stream(m.alphabet(), seed);
          reports[r] = epsa(m.caps(), stream,
                            [&](IntervalX iv, const EventLabel& e) { return m.envelope_tos(iv, e); }, opt);
          break;
        }
        case SamplerKind::aepsa: {
          EventStream stream(models.joint->alphabet(), seed);
          reports[r] = aepsa(*models.joint, stream, opt);
          break;
        }
        case SamplerKind::aepsa_componentwise: {
          EventStream stream(models.joint->alphabet(), seed);
          reports[r] = aepsa_componentwise(*models.joint, stream, opt);
          break;
        }
        case SamplerKind::exact_joint: {
          EventStream stream(models.joint->alphabet(), seed);
          reports[r] = exact_joint_sample(*models.joint, stream, opt);
          break;
        }
      }
    });

    SweepSummary summary;
    summary.sweep_value = points[sp];
    summary.replications = cfg.replications;
    std::vector<double> stops, horizons, jlos, jhis, widths;
    for (std::size_t r = 0; r < cfg.replications; ++r) {
      ReplicationRow row;
      row.sweep_index = sp;
      row.sweep_value = points[sp];
      row.replication = r;
      detail::fill_row_from_report(row, reports[r], cfg.items);
      if (!row.coalesced) ++summary.non_coalesced;
      stops.push_back(static_cast<double>(row.stop_time));
      horizons.push_back(static_cast<double>(row.horizon));
      jlos.push_back(row.jobs_lo);
      jhis.push_back(row.jobs_hi);
      widths.push_back(static_cast<double>(row.interval_width));
      result.rows.push_back(std::move(row));
    }
    summary.stop_time = summarize(stops);
    summary.horizon = summarize(horizons);
    summary.jobs_lo = summarize(jlos);
    summary.jobs_hi = summarize(jhis);
    summary.interval_width = summarize(widths);

    if (cfg.wants(Metric::bound_values)) {
      if (models.individual) {
        if (cfg.model == ModelKind::pos_individual) summary.bound_pos = models.individual->bound_pos_coupling();
        if (cfg.model == ModelKind::tos_individual) summary.bound_tos = models.individual->bound_tos_coupling();
      }
      if (models.joint) {
        if (auto best = models.joint->best_componentwise_stop_bound()) summary.bound_componentwise = best->bound;
        summary.bound_high_service = models.joint->bound_high_service_rate();
      }
    }
    if (cfg.wants(Metric::tv_vs_oracle)) summary.tv_vs_oracle = detail::tv_against_oracle(cfg, models, reports);

    result.summaries.push_back(std::move(summary));
  }
  return result;
}

// --- CSV / JSON output -----------------------------------------------------------

namespace detail {

inline std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

}  // namespace detail

inline void write_raw_csv(std::ostream& out, const ExperimentResult& result) {
  const auto& cfg = result.config;
  out << "model,sampler,sweep_parameter,sweep_value,replication,seed,stop_time,horizon,coalesced";
  if (cfg.wants(Metric::mean_jobs)) out << ",jobs_lo,jobs_hi";
  if (cfg.wants(Metric::interval_width)) out << ",interval_width";
  out << ",sample\n";
  for (const auto& row : result.rows) {
    out << to_string(cfg.model) << ',' << to_string(result.sampler) << ',' << cfg.sweep_parameter << ','
        << detail::opt_num(row.sweep_value) << ',' << row.replication << ',' << row.seed << ',' << row.stop_time
        << ',' << row.horizon << ',' << (row.coalesced ? 1 : 0);
    if (cfg.wants(Metric::mean_jobs)) out << ',' << detail::num(row.jobs_lo) << ',' << detail::num(row.jobs_hi);
    if (cfg.wants(Metric::interval_width)) out << ',' << row.interval_width;
    out << ',' << detail::csv_quote(row.sample) << '\n';
  }
}

inline void write_summary_csv(std::ostream& out, const ExperimentResult& result) {
  const auto& cfg = result.config;
  out << "model,sampler,sweep_parameter,sweep_value,replications,non_coalesced"
      << ",stop_time_mean,stop_time_se,stop_time_ci95,stop_time_mean_log2,horizon_mean";
  if (cfg.wants(Metric::mean_jobs))
    out << ",jobs_lo_mean,jobs_lo_se,jobs_lo_ci95,jobs_hi_mean,jobs_hi_se,jobs_hi_ci95";
  if (cfg.wants(Metric::interval_width)) out << ",interval_width_mean,interval_width_se";
  if (cfg.wants(Metric::bound_values)) out << ",bound_pos,bound_tos,bound_cw_stop,bound_hsr";
  if (cfg.wants(Metric::tv_vs_oracle)) out << ",tv_vs_oracle";
  out << '\n';
  for (const auto& s : result.summaries) {
    out << to_string(cfg.model) << ',' << to_string(result.sampler) << ',' << cfg.sweep_parameter << ','
        << detail::opt_num(s.sweep_value) << ',' << s.replications << ',' << s.non_coalesced << ','
        << detail::num(s.stop_time.mean) << ',' << detail::num(s.stop_time.se) << ','
        << detail::num(s.stop_time.ci95_half()) << ','
        << (s.stop_time.mean > 0 ? detail::num(std::log2(s.stop_time.mean)) : std::string()) << ','
        << detail::num(s.horizon.mean);
    if (cfg.wants(Metric::mean_jobs))
      out << ',' << detail::num(s.jobs_lo.mean) << ',' << detail::num(s.jobs_lo.se) << ','
          << detail::num(s.jobs_lo.ci95_half()) << ',' << detail::num(s.jobs_hi.mean) << ','
          << detail::num(s.jobs_hi.se) << ',' << detail::num(s.jobs_hi.ci95_half());
    if (cfg.wants(Metric::interval_width))
      out << ',' << detail::num(s.interval_width.mean) << ',' << detail::num(s.interval_width.se);
    if (cfg.wants(Metric::bound_values))
      out << ',' << detail::opt_num(s.bound_pos) << ',' << detail::opt_num(s.bound_tos) << ','
          << detail::opt_num(s.bound_componentwise) << ',' << detail::opt_num(s.bound_high_service);
    if (cfg.wants(Metric::tv_vs_oracle)) out << ',' << detail::opt_num(s.tv_vs_oracle);
    out << '\n';
  }
}

inline nlohmann::json summary_json(const ExperimentResult& result) {
  const auto& cfg = result.config;
  nlohmann::json j;
  j["model"] = to_string(cfg.model);
  j["sampler"] = to_string(result.sampler);
  j["items"] = cfg.items;
  j["caps"] = cfg.caps;
  j["replications"] = cfg.replications;
  j["seed"] = cfg.seed;
  j["max_horizon"] = cfg.max_horizon;
  j["sweep_parameter"] = cfg.sweep_parameter;
  nlohmann::json points = nlohmann::json::array();
  for (const auto& s : result.summaries) {
    nlohmann::json p;
    if (s.sweep_value) p["sweep_value"] = *s.sweep_value;
    p["replications"] = s.replications;
    p["non_coalesced"] = s.non_coalesced;
    p["stop_time"] = {{"mean", s.stop_time.mean}, {"se", s.stop_time.se}, {"ci95_half", s.stop_time.ci95_half()}};
    p["horizon"] = {{"mean", s.horizon.mean}};
    p["jobs_lo"] = {{"mean", s.jobs_lo.mean}, {"se", s.jobs_lo.se}};
    p["jobs_hi"] = {{"mean", s.jobs_hi.mean}, {"se", s.jobs_hi.se}};
    p["interval_width"] = {{"mean", s.interval_width.mean}};
    if (s.bound_pos) p["bound_pos"] = *s.bound_pos;
    if (s.bound_tos) p["bound_tos"] = *s.bound_tos;
    if (s.bound_componentwise) p["bound_cw_stop"] = *s.bound_componentwise;
    if (s.bound_high_service) p["bound_hsr"] = *s.bound_high_service;
    if (s.tv_vs_oracle) p["tv_vs_oracle"] = *s.tv_vs_oracle;
    points.push_back(std::move(p));
  }
  j["sweep_points"] = std::move(points);
  return j;
}

}  // namespace ato
