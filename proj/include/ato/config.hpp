#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ato/errors.hpp"
#include "ato/individual.hpp"
#include "ato/joint.hpp"
#include "ato/lattice.hpp"
#include "ato/oracle.hpp"

namespace ato {

enum class ModelKind { pos_individual, tos_individual, pos_joint };

enum class SamplerKind { psa, epsa, aepsa, aepsa_componentwise, exact_joint };

enum class Metric { coupling_time, mean_jobs, interval_width, bound_values, tv_vs_oracle };

// Parsed experiment description. See README for the config grammar.
struct ExperimentConfig {
  ModelKind model = ModelKind::pos_individual;
  int items = 0;
  std::vector<int> caps;
  std::vector<Demand> demands;
  std::vector<ServiceSpec> service;  // individual models
  double joint_mu = 0.0;             // pos-joint

  std::string sweep_parameter;  // "", "rho" or "mu"
  std::vector<double> sweep_values;

  std::optional<SamplerKind> sampler;  // defaulted from the model when absent
  std::size_t replications = 100;
  std::uint64_t seed = 1;
  std::uint64_t max_horizon = std::uint64_t{1} << 24;
  int parallelism = 0;  // 0: hardware concurrency
  std::vector<Metric> outputs{Metric::coupling_time, Metric::mean_jobs};

  SamplerKind effective_sampler() const {
    if (sampler) return *sampler;
    switch (model) {
      case ModelKind::pos_individual:
        return SamplerKind::psa;
      case ModelKind::tos_individual:
        return SamplerKind::epsa;
      case ModelKind::pos_joint:
        return SamplerKind::aepsa;
    }
    return SamplerKind::psa;
  }

  bool wants(Metric m) const { return std::find(outputs.begin(), outputs.end(), m) != outputs.end(); }
};

inline std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::pos_individual: return "pos-individual";
    case ModelKind::tos_individual: return "tos-individual";
    case ModelKind::pos_joint: return "pos-joint";
  }
  return "?";
}

inline std::string to_string(SamplerKind s) {
  switch (s) {
    case SamplerKind::psa: return "psa";
    case SamplerKind::epsa: return "epsa";
    case SamplerKind::aepsa: return "aepsa";
    case SamplerKind::aepsa_componentwise: return "aepsa-cw";
    case SamplerKind::exact_joint: return "exact";
  }
  return "?";
}

namespace detail {

inline std::string trim(std::string s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

struct ConfigLineError {
  static ConfigError at(int line, const std::string& msg) {
    return ConfigError("config line " + std::to_string(line) + ": " + msg);
  }
};

inline double parse_double(const std::string& s, int line) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ConfigLineError::at(line, "expected a number, got '" + s + "'");
  }
  if (pos != s.size()) throw ConfigLineError::at(line, "trailing characters after number in '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s, int line) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw ConfigLineError::at(line, "expected an integer, got '" + s + "'");
  }
  if (pos != s.size()) throw ConfigLineError::at(line, "trailing characters after integer in '" + s + "'");
  return v;
}

inline std::vector<std::string> split_list(const std::string& s, int line) {
  std::string body = trim(s);
  if (body.size() < 2 || body.front() != '[' || body.back() != ']')
    throw ConfigLineError::at(line, "expected a bracketed list, got '" + s + "'");
  body = body.substr(1, body.size() - 2);
  std::vector<std::string> items;
  std::string cur;
  for (char c : body) {
    if (c == ',') {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) items.push_back(trim(cur));
  if (items.empty()) throw ConfigLineError::at(line, "empty list '" + s + "'");
  for (const auto& it : items)
    if (it.empty()) throw ConfigLineError::at(line, "empty element in list '" + s + "'");
  return items;
}

// Item lists are 1-based in config files: "[1,3]" selects items 1 and 3.
inline ItemMask parse_subset(const std::string& s, int items, int line) {
  ItemMask mask = 0;
  for (const std::string& tok : split_list(s, line)) {
    const long long idx = parse_int(tok, line);
    if (idx < 1 || idx > items) throw ConfigLineError::at(line, "item index " + tok + " outside 1.." + std::to_string(items));
    mask |= ItemMask{1} << (idx - 1);
  }
  if (mask == 0) throw ConfigLineError::at(line, "demand subset must be non-empty");
  return mask;
}

inline ServiceSpec parse_service_spec(const std::string& s, int line) {
  const auto open = s.find('(');
  if (open == std::string::npos || s.back() != ')')
    throw ConfigLineError::at(line, "expected single-server(mu), infinite-server(mu) or table(v0,...), got '" + s + "'");
  const std::string name = trim(s.substr(0, open));
  const std::string args = s.substr(open + 1, s.size() - open - 2);
  if (name == "single-server") return ServiceSpec::single_server(parse_double(trim(args), line));
  if (name == "infinite-server") return ServiceSpec::infinite_server(parse_double(trim(args), line));
  if (name == "table") {
    std::vector<double> t;
    std::stringstream ss(args);
    std::string tok;
    while (std::getline(ss, tok, ',')) t.push_back(parse_double(trim(tok), line));
    return ServiceSpec::from_table(std::move(t));
  }
  throw ConfigLineError::at(line, "unknown service form '" + name + "'");
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in) {
  using detail::ConfigLineError;
  ExperimentConfig cfg;
  std::string section;
  std::string raw;
  int line = 0;
  bool have_model = false, have_items = false, have_caps = false;
  std::vector<std::pair<std::string, std::pair<std::string, int>>> service_entries;

  while (std::getline(in, raw)) {
    ++line;
    std::string text = raw;
    if (const auto hash = text.find('#'); hash != std::string::npos) text.erase(hash);
    text = detail::trim(text);
    if (text.empty()) continue;

    if (text.find('=') == std::string::npos) {
      if (text.front() == '[' && text.back() == ']') {
        section = detail::trim(text.substr(1, text.size() - 2));
        if (section != "demands" && section != "service" && section != "joint" && section != "sweep" &&
            section != "run")
          throw ConfigLineError::at(line, "unknown section [" + section + "]");
        continue;
      }
      throw ConfigLineError::at(line, "expected 'key = value' or a [section] header");
    }

    const auto eq = text.find('=');
    const std::string key = detail::trim(text.substr(0, eq));
    const std::string value = detail::trim(text.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigLineError::at(line, "empty key or value");

    if (section.empty()) {
      if (key == "model") {
        if (value == "pos-individual") cfg.model = ModelKind::pos_individual;
        else if (value == "tos-individual") cfg.model = ModelKind::tos_individual;
        else if (value == "pos-joint") cfg.model = ModelKind::pos_joint;
        else throw ConfigLineError::at(line, "unknown model '" + value + "'");
        have_model = true;
      } else if (key == "items") {
        const long long v = detail::parse_int(value, line);
        if (v < 1 || v > kMaxItems) throw ConfigLineError::at(line, "items must be in 1..63");
        cfg.items = static_cast<int>(v);
        have_items = true;
      } else if (key == "caps") {
        if (value.front() == '[') {
          for (const auto& tok : detail::split_list(value, line))
            cfg.caps.push_back(static_cast<int>(detail::parse_int(tok, line)));
        } else {
          cfg.caps.assign(1, static_cast<int>(detail::parse_int(value, line)));
        }
        have_caps = true;
      } else {
        throw ConfigLineError::at(line, "unknown top-level key '" + key + "'");
      }
    } else if (section == "demands") {
      if (!have_items) throw ConfigLineError::at(line, "items must be set before [demands]");
      cfg.demands.push_back(Demand{detail::parse_subset(key, cfg.items, line), detail::parse_double(value, line)});
    } else if (section == "service") {
      service_entries.emplace_back(key, std::make_pair(value, line));
    } else if (section == "joint") {
      if (key == "mu") cfg.joint_mu = detail::parse_double(value, line);
      else throw ConfigLineError::at(line, "unknown key '" + key + "' in [joint]");
    } else if (section == "sweep") {
      if (key == "parameter") {
        if (value != "rho" && value != "mu") throw ConfigLineError::at(line, "sweep parameter must be rho or mu");
        cfg.sweep_parameter = value;
      } else if (key == "values") {
        for (const auto& tok : detail::split_list(value, line)) cfg.sweep_values.push_back(detail::parse_double(tok, line));
      } else {
        throw ConfigLineError::at(line, "unknown key '" + key + "' in [sweep]");
      }
    } else if (section == "run") {
      if (key == "replications") {
        const long long v = detail::parse_int(value, line);
        if (v < 1) throw ConfigLineError::at(line, "replications must be at least 1");
        cfg.replications = static_cast<std::size_t>(v);
      } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(detail::parse_int(value, line));
      } else if (key == "max-horizon") {
        const long long v = detail::parse_int(value, line);
        if (v < 1) throw ConfigLineError::at(line, "max-horizon must be at least 1");
        cfg.max_horizon = static_cast<std::uint64_t>(v);
      } else if (key == "parallelism") {
        const long long v = detail::parse_int(value, line);
        if (v < 0) throw ConfigLineError::at(line, "parallelism must be non-negative");
        cfg.parallelism = static_cast<int>(v);
      } else if (key == "sampler") {
        if (value == "psa") cfg.sampler = SamplerKind::psa;
        else if (value == "epsa") cfg.sampler = SamplerKind::epsa;
        else if (value == "aepsa") cfg.sampler = SamplerKind::aepsa;
        else if (value == "aepsa-cw") cfg.sampler = SamplerKind::aepsa_componentwise;
        else if (value == "exact") cfg.sampler = SamplerKind::exact_joint;
        else throw ConfigLineError::at(line, "unknown sampler '" + value + "'");
      } else if (key == "outputs") {
        cfg.outputs.clear();
        for (const auto& tok : detail::split_list(value, line)) {
          if (tok == "coupling-time") cfg.outputs.push_back(Metric::coupling_time);
          else if (tok == "mean-jobs") cfg.outputs.push_back(Metric::mean_jobs);
          else if (tok == "interval-width") cfg.outputs.push_back(Metric::interval_width);
          else if (tok == "bound-values") cfg.outputs.push_back(Metric::bound_values);
          else if (tok == "tv-vs-oracle") cfg.outputs.push_back(Metric::tv_vs_oracle);
          else throw ConfigLineError::at(line, "unknown output metric '" + tok + "'");
        }
      } else {
        throw ConfigLineError::at(line, "unknown key '" + key + "' in [run]");
      }
    }
  }

  if (!have_model) throw ConfigError("config: missing 'model'");
  if (!have_items) throw ConfigError("config: missing 'items'");
  if (!have_caps) throw ConfigError("config: missing 'caps'");
  if (cfg.caps.size() == 1 && cfg.items > 1) cfg.caps.assign(static_cast<std::size_t>(cfg.items), cfg.caps[0]);
  if (cfg.caps.size() != static_cast<std::size_t>(cfg.items))
    throw ConfigError("config: caps must list one capacity per item");
  if (cfg.demands.empty()) throw ConfigError("config: [demands] section is empty");

  if (cfg.model != ModelKind::pos_joint) {
    cfg.service.assign(static_cast<std::size_t>(cfg.items), ServiceSpec{});
    std::vector<char> set(static_cast<std::size_t>(cfg.items), 0);
    for (const auto& [key, entry] : service_entries) {
      const auto& [value, entry_line] = entry;
      const ServiceSpec spec = detail::parse_service_spec(value, entry_line);
      if (key == "all") {
        for (int i = 0; i < cfg.items; ++i) {
          cfg.service[static_cast<std::size_t>(i)] = spec;
          set[static_cast<std::size_t>(i)] = 1;
        }
      } else {
        const long long idx = detail::parse_int(key, entry_line);
        if (idx < 1 || idx > cfg.items) throw ConfigLineError::at(entry_line, "service item index out of range");
        cfg.service[static_cast<std::size_t>(idx - 1)] = spec;
        set[static_cast<std::size_t>(idx - 1)] = 1;
      }
    }
    for (int i = 0; i < cfg.items; ++i)
      if (!set[static_cast<std::size_t>(i)])
        throw ConfigError("config: missing [service] entry for item " + std::to_string(i + 1));
  } else {
    if (!service_entries.empty()) throw ConfigError("config: [service] does not apply to pos-joint; use [joint] mu");
    if (!(cfg.joint_mu > 0)) throw ConfigError("config: pos-joint requires [joint] mu > 0");
  }

  if (!cfg.sweep_parameter.empty() && cfg.sweep_values.empty())
    throw ConfigError("config: [sweep] parameter given without values");
  if (cfg.sweep_parameter.empty() && !cfg.sweep_values.empty())
    throw ConfigError("config: [sweep] values given without a parameter");
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

// --- Model construction per sweep point -------------------------------------------

struct BuiltModels {
  std::optional<IndividualModel> individual;
  std::optional<JointModel> joint;
};

inline BuiltModels build_models(const ExperimentConfig& cfg, std::optional<double> sweep_value) {
  CapacityVector caps(cfg.caps);
  std::vector<double> lambda_item(static_cast<std::size_t>(cfg.items), 0.0);
  for (const Demand& d : cfg.demands)
    for (int i = 0; i < cfg.items; ++i)
      if ((d.subset >> i) & 1) lambda_item[static_cast<std::size_t>(i)] += d.rate;

  BuiltModels out;
  if (cfg.model == ModelKind::pos_joint) {
    double mu = cfg.joint_mu;
    if (sweep_value) {
      if (cfg.sweep_parameter == "mu") {
        mu = *sweep_value;
      } else {  // rho: mu scaled off the mean per-item demand rate
        double mean_lambda = 0.0;
        for (double l : lambda_item) mean_lambda += l;
        mean_lambda /= static_cast<double>(cfg.items);
        if (!(*sweep_value > 0)) throw ConfigError("rho sweep values must be positive");
        mu = mean_lambda / *sweep_value;
      }
    }
    out.joint.emplace(caps, cfg.demands, mu);
    return out;
  }

  std::vector<ServiceSpec> service = cfg.service;
  if (sweep_value) {
    for (int i = 0; i < cfg.items; ++i) {
      ServiceSpec& spec = service[static_cast<std::size_t>(i)];
      if (spec.kind == ServiceSpec::Kind::table)
        throw ConfigError("sweeps require single-server or infinite-server service forms");
      if (cfg.sweep_parameter == "mu") {
        spec.rate = *sweep_value;
      } else {
        if (!(*sweep_value > 0)) throw ConfigError("rho sweep values must be positive");
        spec.rate = lambda_item[static_cast<std::size_t>(i)] / *sweep_value;
      }
    }
  }
  out.individual.emplace(caps, cfg.demands, service);
  return out;
}

// --- Static diagnostics ----------------------------------------------------------

inline std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> diags;
  const SamplerKind sampler = cfg.effective_sampler();

  switch (cfg.model) {
    case ModelKind::pos_individual:
      if (sampler != SamplerKind::psa) diags.push_back("error: pos-individual runs with sampler psa");
      break;
    case ModelKind::tos_individual:
      if (sampler != SamplerKind::epsa) diags.push_back("error: tos-individual runs with sampler epsa");
      break;
    case ModelKind::pos_joint:
      if (sampler == SamplerKind::psa || sampler == SamplerKind::epsa)
        diags.push_back("error: pos-joint runs with sampler aepsa, aepsa-cw or exact");
      break;
  }

  std::vector<std::optional<double>> sweep_points;
  if (cfg.sweep_values.empty()) {
    sweep_points.push_back(std::nullopt);
  } else {
    for (double v : cfg.sweep_values) sweep_points.emplace_back(v);
  }

  for (const auto& point : sweep_points) {
    const std::string where = point ? (" at " + cfg.sweep_parameter + "=" + std::to_string(*point)) : "";
    try {
      BuiltModels models = build_models(cfg, point);
      if (models.individual) {
        if (cfg.model == ModelKind::pos_individual && !models.individual->bound_pos_coupling())
          diags.push_back("warning: POS coupling-time bound not applicable" + where +
                          " (an item is neither demand-starved nor demand-saturated)");
        if (cfg.model == ModelKind::tos_individual && !models.individual->bound_tos_coupling())
          diags.push_back("warning: TOS coupling-time bound not applicable" + where +
                          " (total service rate does not dominate demand)");
      }
      if (models.joint) {
        if (!models.joint->bound_high_service_rate())
          diags.push_back("warning: exact sampler may not terminate" + where +
                          " (return rate below total per-item demand rate); horizon cap applies");
        if (!models.joint->best_componentwise_stop_bound())
          diags.push_back("warning: componentwise stopping-time bound not applicable" + where);
      }
    } catch (const ConfigError& e) {
      diags.push_back(std::string("error: ") + e.what() + where);
    }
  }

  if (cfg.wants(Metric::tv_vs_oracle)) {
    if (sampler == SamplerKind::aepsa || sampler == SamplerKind::aepsa_componentwise)
      diags.push_back("error: tv-vs-oracle requires an exact sampler (psa, epsa or exact)");
    try {
      if (cfg.model == ModelKind::pos_joint) {
        BuiltModels models = build_models(cfg, sweep_points.front());
        (void)enumerate_joint_states(*models.joint);
      } else {
        (void)enumerate_states(CapacityVector(cfg.caps));
      }
    } catch (const SizeError& e) {
      diags.push_back(std::string("error: tv-vs-oracle: ") + e.what());
    }
  }
  return diags;
}

}  // namespace ato
