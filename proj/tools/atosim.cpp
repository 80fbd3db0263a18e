// Command-line runner for exact-sampling experiments on assemble-to-order
// systems: `run` executes a sampler campaign from a config file and writes
// CSV/JSON tables, `validate` reports config diagnostics without running,
// `oracle` solves the stationary distribution of small instances exactly.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ato/config.hpp"
#include "ato/experiment.hpp"
#include "ato/oracle.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitSizeError = 3;

struct CommonArgs {
  std::string config_path;
  std::string out_prefix;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replications;
  std::optional<std::uint64_t> max_horizon;
  std::optional<int> parallelism;
};

ato::ExperimentConfig load_config(const CommonArgs& args) {
  ato::ExperimentConfig cfg = ato::parse_config_file(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (args.replications) cfg.replications = *args.replications;
  if (args.max_horizon) cfg.max_horizon = *args.max_horizon;
  if (args.parallelism) cfg.parallelism = *args.parallelism;
  return cfg;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ato::ConfigError("cannot open output file '" + path + "'");
  return out;
}

int cmd_run(const CommonArgs& args) {
  const ato::ExperimentConfig cfg = load_config(args);
  const ato::ExperimentResult result = ato::run_experiment(cfg);

  if (!args.out_prefix.empty()) {
    auto rows = open_out(args.out_prefix + ".csv");
    ato::write_raw_csv(rows, result);
    auto summary = open_out(args.out_prefix + ".summary.csv");
    ato::write_summary_csv(summary, result);
    auto json = open_out(args.out_prefix + ".summary.json");
    json << ato::summary_json(result).dump(2) << '\n';
    std::cout << "wrote " << args.out_prefix << ".csv, .summary.csv, .summary.json\n";
  }
  ato::write_summary_csv(std::cout, result);
  return 0;
}

int cmd_validate(const CommonArgs& args) {
  const ato::ExperimentConfig cfg = load_config(args);
  const auto diags = ato::validate_config(cfg);
  for (const auto& d : diags) std::cout << d << '\n';
  if (diags.empty()) std::cout << "ok: no diagnostics\n";
  return 0;
}

int cmd_oracle(const CommonArgs& args) {
  const ato::ExperimentConfig cfg = load_config(args);
  const ato::BuiltModels models =
      ato::build_models(cfg, cfg.sweep_values.empty() ? std::nullopt : std::optional<double>(cfg.sweep_values[0]));

  ato::DenseChain chain;
  if (cfg.model == ato::ModelKind::pos_joint) {
    const auto states = ato::enumerate_joint_states(*models.joint);
    chain = ato::build_chain(states, models.joint->alphabet(),
                             [&](const ato::StateN& n, const ato::EventLabel& e) { return models.joint->step_n(n, e); },
                             [](const ato::StateN& n) { return ato::to_string(n); });
  } else {
    const auto states = ato::enumerate_states(ato::CapacityVector(cfg.caps));
    const auto& m = *models.individual;
    chain = ato::build_chain(states, m.alphabet(),
                             [&](const ato::StateX& x, const ato::EventLabel& e) {
                               return cfg.model == ato::ModelKind::pos_individual ? m.step_pos(x, e)
                                                                                  : m.step_tos(x, e);
                             },
                             [](const ato::StateX& x) { return ato::to_string(x); });
  }
  const auto pi = ato::stationary(chain);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!args.out_prefix.empty()) {
    file = open_out(args.out_prefix);
    out = &file;
  }
  (*out) << "state,probability\n";
  (*out).precision(17);
  for (std::size_t k = 0; k < pi.size(); ++k)
    (*out) << ato::detail::csv_quote(chain.labels[k]) << ',' << pi[k] << '\n';
  if (!args.out_prefix.empty()) std::cout << "wrote " << args.out_prefix << " (" << pi.size() << " states)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact sampling for assemble-to-order systems"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* sub, bool with_out, const std::string& out_desc) {
    sub->add_option("--config", args.config_path, "experiment config file")->required();
    if (with_out) sub->add_option("--out", args.out_prefix, out_desc);
    sub->add_option("--seed", args.seed, "override base seed");
    sub->add_option("--replications", args.replications, "override replication count");
    sub->add_option("--max-horizon", args.max_horizon, "override backward horizon cap");
    sub->add_option("--parallelism", args.parallelism, "worker threads (0 = hardware)");
  };

  CLI::App* run = app.add_subcommand("run", "run the sampler campaign and emit CSV/JSON tables");
  add_common(run, true, "output prefix (<prefix>.csv, <prefix>.summary.csv, <prefix>.summary.json)");
  CLI::App* validate = app.add_subcommand("validate", "report config diagnostics without running");
  add_common(validate, false, "");
  CLI::App* oracle = app.add_subcommand("oracle", "solve the stationary distribution exactly (small instances)");
  add_common(oracle, true, "output CSV path (state, probability)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }

  try {
    if (run->parsed()) return cmd_run(args);
    if (validate->parsed()) return cmd_validate(args);
    if (oracle->parsed()) return cmd_oracle(args);
  } catch (const ato::SizeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSizeError;
  } catch (const ato::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
