// Copyright 2026 The prefscale Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "prefscale/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "prefscale/config.hpp"
#include "prefscale/errors.hpp"
#include "prefscale/estimator.hpp"
#include "prefscale/label_service.hpp"
#include "prefscale/orchestrator.hpp"
#include "prefscale/persistence.hpp"
#include "prefscale/text_io.hpp"

namespace prefscale {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Flags of train/serve, each mapped onto a config key.
struct RunFlags {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> given;  // key, value
  std::vector<std::string> overrides;                       // key=value
  std::string preset;
  std::string out_dir;
  std::string host = "127.0.0.1";
  int port = 8765;

  std::string env, labeler, budget, demo_fraction, seed, steps;
  bool sync = false;
  bool async = false;
  bool faithful = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config_file,
                  "Config file (key = value); wins over flags")
      ->check(CLI::ExistingFile);
  cmd->add_option("--env", f.env, "Environment name");
  cmd->add_option("--labeler", f.labeler,
                  "true-reward | oracle-hard | oracle-scaled | human-ui");
  cmd->add_option("--budget", f.budget, "Label budget");
  cmd->add_option("--demo-fraction", f.demo_fraction,
                  "Share of labels answered by the estimator (0-0.5)");
  cmd->add_option("--seed", f.seed, "Run seed");
  cmd->add_option("--steps", f.steps, "Total environment steps");
  cmd->add_option("--set", f.overrides, "Any config key as key=value");
  cmd->add_option("--preset-budget", f.preset,
                  "Long-run label budget preset: full (1400) or reduced (700)")
      ->check(CLI::IsMember({"full", "reduced"}));
  cmd->add_flag("--faithful-budget", f.faithful,
                "Require labels <= 0.01% of environment steps");
  auto* sync = cmd->add_flag("--sync", f.sync, "Deterministic single thread");
  auto* async = cmd->add_flag("--async", f.async, "Three worker threads");
  sync->excludes(async);
  cmd->add_option("--out", f.out_dir, "Run directory")->required();
  cmd->add_option("--host", f.host, "Label service host");
  cmd->add_option("--port", f.port, "Label service port");
}

std::vector<std::pair<std::string, std::string>> collect_given(
    const CLI::App* cmd, const RunFlags& f) {
  std::vector<std::pair<std::string, std::string>> given;
  auto take = [&](const char* flag, const char* key, const std::string& v) {
    if (cmd->count(flag) > 0) given.emplace_back(key, v);
  };
  take("--env", "env", f.env);
  take("--labeler", "labeler", f.labeler);
  take("--budget", "label_budget", f.budget);
  take("--demo-fraction", "demo_fraction", f.demo_fraction);
  take("--seed", "seed", f.seed);
  take("--steps", "total_steps", f.steps);
  if (!f.preset.empty()) {
    given.emplace_back("label_budget",
                       std::to_string(preset_label_budget(f.preset == "reduced")));
  }
  if (f.faithful) given.emplace_back("faithful_budget", "true");
  if (f.sync) given.emplace_back("mode", "sync");
  if (f.async) given.emplace_back("mode", "async");
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    }
    given.emplace_back(std::string(trim(kv.substr(0, eq))),
                       std::string(trim(kv.substr(eq + 1))));
  }
  return given;
}

// Flags first, then the file; a file entry that contradicts a flag wins
// with a warning.
RunConfig build_config(const RunFlags& f,
                       const std::vector<std::pair<std::string, std::string>>& given,
                       std::ostream& err) {
  RunConfig config;
  for (const auto& [key, value] : given) set_config_value(config, key, value);
  if (!f.config_file.empty()) {
    const auto entries = parse_config_entries(read_file(f.config_file));
    for (const auto& e : entries) {
      for (const auto& [key, value] : given) {
        if (key == e.key && value != e.value) {
          err << "warning: " << f.config_file << ":" << e.line << " sets "
              << e.key << " = " << e.value << ", overriding the flag value "
              << value << "\n";
        }
      }
      try {
        set_config_value(config, e.key, e.value);
      } catch (const ConfigError& ex) {
        throw ConfigError(f.config_file + ":" + std::to_string(e.line) + ": " +
                          ex.what());
      }
    }
  }
  validate(config);
  return config;
}

int do_train(const RunFlags& flags, const RunConfig& config, std::ostream& out,
             std::ostream& err) {
  RunHooks hooks;
  hooks.log = [&err](const std::string& line) { err << line << "\n"; };
  LabelBroker broker;
  RunStatus status;
  std::unique_ptr<LabelService> service;
  if (config.labeler == Labeler::kHumanUi) {
    service = std::make_unique<LabelService>(broker, status);
    const int port = service->start(flags.host, flags.port);
    err << "label service on http://" << flags.host << ":" << port << "\n";
    hooks.broker = &broker;
    hooks.status = &status;
  }
  const RunArtifacts run = run_experiment(config, flags.out_dir, hooks);
  out << "run directory: " << run.run_dir << "\n"
      << "steps: " << run.steps_done << "\n"
      << "labels: " << run.ledger.total() << " (labeller "
      << run.ledger.human_count << ", estimator " << run.ledger.estimator_count
      << ")\n"
      << "final return: " << format_double(run.final_eval.mean) << " +/- "
      << format_double(run.final_eval.std) << "\n";
  return kExitOk;
}

struct EvalFlags {
  std::string checkpoint;
  std::string env = "velocity_runner";
  int episodes = 5;
  std::uint64_t seed = 1;
  std::string out;
};

int do_eval(const EvalFlags& f, std::ostream& out) {
  if (f.episodes < 1) throw ConfigError("--episodes must be at least 1");
  const EnvSpec spec = make_env_spec(f.env);
  const PolicyParams policy = load_policy(f.checkpoint);
  const EvalSummary summary = evaluate_policy(spec, policy, f.episodes, f.seed);
  out << "episodes: " << f.episodes << "\n"
      << "mean_return: " << format_double(summary.mean) << "\n"
      << "std_return: " << format_double(summary.std) << "\n";
  if (!f.out.empty()) {
    json j = {{"env", spec.name},
              {"checkpoint", f.checkpoint},
              {"episodes", f.episodes},
              {"seed", f.seed},
              {"mean_return", summary.mean},
              {"std_return", summary.std},
              {"returns", summary.returns}};
    write_file(f.out, j.dump(2) + "\n");
  }
  return kExitOk;
}

struct BenchFlags {
  std::string db;
  int split = 70;
  int seeds = 5;
  std::string out;
  double c = 1.0;
  double epsilon = 0.01;
};

int do_bench(const BenchFlags& f, std::ostream& out) {
  if (f.seeds < 1) throw ConfigError("--seeds must be at least 1");
  std::vector<PreferenceRecord> records;
  for (auto& r : load_preference_db(f.db)) {
    if (r.source != LabelSource::kEstimator) records.push_back(std::move(r));
  }
  if (records.size() < 50) {
    throw RuntimeError("estimator-bench needs at least 50 labelled records, " +
                       f.db + " has " + std::to_string(records.size()));
  }
  const EstimatorDataset data = make_dataset(records, true);
  SvrConfig svr;
  svr.c = f.c;
  svr.epsilon = f.epsilon;
  RunningStats ols_stats, svr_stats;
  for (int s = 0; s < f.seeds; ++s) {
    Rng rng(static_cast<std::uint64_t>(s), StreamId::kEstimatorSplit);
    auto [train, test] = split_dataset(data, f.split / 100.0, rng);
    ols_stats.push(evaluate_mse(fit_ols(train), test).mean);
    svr_stats.push(evaluate_mse(fit_svr(train, svr), test).mean);
  }
  const bool svr_chosen = !(ols_stats.mean() < svr_stats.mean());
  const std::string scenario =
      fs::path(f.db).stem().string() + "/" + std::to_string(f.split);
  std::string csv = "scenario,method,mse_mean,mse_std,chosen\n";
  csv += scenario + ",OLS," + format_double(ols_stats.mean()) + "," +
         format_double(ols_stats.stddev()) + "," + (svr_chosen ? "0" : "1") +
         "\n";
  csv += scenario + ",SVR," + format_double(svr_stats.mean()) + "," +
         format_double(svr_stats.stddev()) + "," + (svr_chosen ? "1" : "0") +
         "\n";
  if (f.out.empty()) {
    out << csv;
  } else {
    write_file(f.out, csv);
    out << "wrote " << f.out << "\n";
  }
  return kExitOk;
}

void dump_segment(std::ostream& out, const char* side, const Segment& s) {
  out << side << ": episode " << s.source_episode << ", start "
      << s.start_index << ", frames " << s.length() << "\n"
      << "  true_return (stored) " << format_double(s.true_return) << "\n"
      << "  true_return (recomputed) "
      << format_double(s.recompute_true_return()) << "\n";
  for (std::size_t t = 0; t < s.length(); ++t) {
    const auto& tr = s.transitions[t];
    out << "  " << t << "  obs";
    for (Eigen::Index i = 0; i < tr.observation.size(); ++i) {
      out << ' ' << format_double(tr.observation[i]);
    }
    out << "  act";
    for (Eigen::Index i = 0; i < tr.action.size(); ++i) {
      out << ' ' << format_double(tr.action[i]);
    }
    out << "  r " << format_double(tr.true_reward) << "\n";
  }
}

int do_replay(const std::string& db, long long index, std::ostream& out) {
  if (index < 0) throw ConfigError("--index must be non-negative");
  const auto records = load_preference_db(db);
  if (static_cast<std::size_t>(index) >= records.size()) {
    throw RuntimeError("--index " + std::to_string(index) + " is out of range (" +
                       std::to_string(records.size()) + " records)");
  }
  const auto& r = records[static_cast<std::size_t>(index)];
  out << "record " << index << "\n"
      << "z_hat " << format_double(r.z_hat) << "\n"
      << "source " << to_string(r.source) << "\n"
      << "timestep " << r.timestep << "\n";
  dump_segment(out, "left", r.left);
  dump_segment(out, "right", r.right);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Preference-supervised reinforcement learning with scaled labels",
               "prefscale"};
  app.require_subcommand(1);

  RunFlags train_flags;
  auto* train = app.add_subcommand("train", "Run one experiment");
  add_run_flags(train, train_flags);

  RunFlags serve_flags;
  auto* serve = app.add_subcommand(
      "serve", "Run an experiment labelled by a person through the HTTP API");
  add_run_flags(serve, serve_flags);

  EvalFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "Greedy evaluation of a policy");
  eval->add_option("--checkpoint", eval_flags.checkpoint, "Policy checkpoint")
      ->required();
  eval->add_option("--env", eval_flags.env, "Environment name");
  eval->add_option("--episodes", eval_flags.episodes, "Episodes");
  eval->add_option("--seed", eval_flags.seed, "Evaluation seed");
  eval->add_option("--out", eval_flags.out, "Write a JSON summary here");

  BenchFlags bench_flags;
  auto* bench = app.add_subcommand("estimator-bench",
                                   "OLS vs SVR held-out MSE over seeds");
  bench->add_option("--db", bench_flags.db, "Preference database")->required();
  bench->add_option("--split", bench_flags.split, "Training share in percent")
      ->check(CLI::IsMember({50, 70}));
  bench->add_option("--seeds", bench_flags.seeds, "Number of split seeds");
  bench->add_option("--out", bench_flags.out, "CSV output path");
  bench->add_option("--svr-c", bench_flags.c, "SVR box constraint");
  bench->add_option("--svr-epsilon", bench_flags.epsilon, "SVR tube width");

  std::string replay_db;
  long long replay_index = 0;
  auto* replay = app.add_subcommand("replay", "Print a stored preference pair");
  replay->add_option("--db", replay_db, "Preference database")->required();
  replay->add_option("--index", replay_index, "Record index")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed() || serve->parsed()) {
      const bool serving = serve->parsed();
      RunFlags& flags = serving ? serve_flags : train_flags;
      auto given = collect_given(serving ? serve : train, flags);
      if (serving) {
        given.emplace_back("labeler", "human_ui");
        if (!flags.sync) given.emplace_back("mode", "async");
      }
      RunConfig config;
      try {
        config = build_config(flags, given, err);
      } catch (const ConfigError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
      } catch (const ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
      }
      return do_train(flags, config, out, err);
    }
    if (eval->parsed()) return do_eval(eval_flags, out);
    if (bench->parsed()) return do_bench(bench_flags, out);
    if (replay->parsed()) return do_replay(replay_db, replay_index, out);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace prefscale
