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

// Python bindings for the core operations.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "prefscale/config.hpp"
#include "prefscale/envlib.hpp"
#include "prefscale/errors.hpp"
#include "prefscale/estimator.hpp"
#include "prefscale/oracle.hpp"
#include "prefscale/orchestrator.hpp"
#include "prefscale/persistence.hpp"
#include "prefscale/reward_model.hpp"

namespace py = pybind11;
using namespace prefscale;

namespace {

RunConfig config_from_dict(const py::dict& overrides) {
  RunConfig config;
  for (const auto& [key, value] : overrides) {
    const auto k = py::str(key).cast<std::string>();
    std::string v;
    if (py::isinstance<py::bool_>(value)) {
      v = value.cast<bool>() ? "true" : "false";
    } else if (py::isinstance<py::list>(value) || py::isinstance<py::tuple>(value)) {
      for (const auto& item : value) {
        v += (v.empty() ? "" : ",") + py::str(item).cast<std::string>();
      }
    } else {
      v = py::str(value).cast<std::string>();
    }
    set_config_value(config, k, v);
  }
  return config;
}

py::dict ledger_dict(const LabelLedger& l) {
  py::dict d;
  d["budget"] = l.budget;
  d["human_count"] = l.human_count;
  d["estimator_count"] = l.estimator_count;
  d["query_steps"] = l.query_steps;
  py::list subs;
  for (const auto& s : l.substitutions) subs.append(py::make_tuple(s.slot, s.reason));
  d["substitutions"] = subs;
  return d;
}

py::dict record_dict(const PreferenceRecord& r) {
  py::dict d;
  d["z_hat"] = r.z_hat;
  d["source"] = std::string(to_string(r.source));
  d["timestep"] = r.timestep;
  d["left_return"] = r.left.true_return;
  d["right_return"] = r.right.true_return;
  d["frames"] = r.left.length();
  return d;
}

EstimatorDataset dataset(const Matrix& x, const Vector& y) {
  if (x.rows() != y.size()) throw ConfigError("features and labels disagree in length");
  return make_dataset(x, y, false);
}

}  // namespace

PYBIND11_MODULE(_prefscale, m) {
  m.doc() = "Preference-scaled reward learning: oracle, reward model, estimator and runs.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<NotReady>(m, "NotReady", PyExc_RuntimeError);
  py::register_exception<RuntimeError>(m, "RunError", PyExc_RuntimeError);

  // Scaling oracle.
  py::class_<ScalingContext>(m, "ScalingContext")
      .def(py::init<std::size_t>(), py::arg("window_sets") = 0)
      .def("add", &ScalingContext::add, py::arg("r_left"), py::arg("r_right"))
      .def("__len__", &ScalingContext::size)
      .def_property_readonly("sorted", &ScalingContext::sorted)
      .def_property_readonly("lower", &ScalingContext::lower)
      .def_property_readonly("upper", &ScalingContext::upper)
      .def_property_readonly("degenerate", &ScalingContext::degenerate);
  m.def("scale_preference", &scale_preference, py::arg("ctx"), py::arg("r_left"),
        py::arg("r_right"));
  m.def("hard_preference", &hard_preference, py::arg("r_left"), py::arg("r_right"));
  m.def(
      "label_stream",
      [](const std::vector<std::pair<double, double>>& pairs, std::size_t window) {
        ScalingContext ctx(window);
        std::vector<double> out;
        out.reserve(pairs.size());
        for (const auto& [l, r] : pairs) {
          ctx.add(l, r);
          out.push_back(scale_preference(ctx, l, r));
        }
        return out;
      },
      py::arg("pairs"), py::arg("window_sets") = 0,
      "Scaled labels for a sequence of (left, right) returns, each added to the "
      "context before it is labelled.");

  // Preference loss.
  m.def("pair_probability", &pair_probability, py::arg("sum_left"), py::arg("sum_right"));
  m.def(
      "preference_loss",
      [](const std::vector<std::tuple<double, double, double>>& batch) {
        PreferenceBatch b;
        for (const auto& [l, r, z] : batch) b.push_back({l, r, z});
        return preference_loss(b);
      },
      py::arg("batch"), "Mean soft-label cross-entropy over (sum_left, sum_right, z).");

  // Environments.
  py::class_<EnvSpec>(m, "EnvSpec")
      .def_readonly("name", &EnvSpec::name)
      .def_readonly("obs_dim", &EnvSpec::obs_dim)
      .def_readonly("act_dim", &EnvSpec::act_dim)
      .def_readonly("horizon", &EnvSpec::horizon)
      .def_readonly("action_low", &EnvSpec::action_low)
      .def_readonly("action_high", &EnvSpec::action_high);
  py::class_<EnvState>(m, "EnvState")
      .def_readonly("physical", &EnvState::physical)
      .def_readonly("step_index", &EnvState::step_index);
  m.def("make_env_spec", &make_env_spec, py::arg("name"));
  m.def("reset", &reset, py::arg("spec"), py::arg("seed"));
  m.def(
      "step",
      [](const EnvSpec& spec, const EnvState& state, const Vector& action) {
        auto [next, result] = step(spec, state, action);
        return py::make_tuple(next, result.observation, result.true_reward, result.done);
      },
      py::arg("spec"), py::arg("state"), py::arg("action"),
      "Returns (state, observation, reward, done).");
  m.def("analytic_max_return", &analytic_max_return, py::arg("spec"));
  m.def("velocity_runner_reward", &velocity_runner_reward, py::arg("velocity"));

  // Estimator.
  py::class_<OlsModel>(m, "OlsModel")
      .def_readonly("weights", &OlsModel::weights)
      .def_readonly("intercept", &OlsModel::intercept)
      .def("predict", py::overload_cast<const OlsModel&, const Vector&>(&predict));
  py::class_<SvrConfig>(m, "SvrConfig")
      .def(py::init<>())
      .def_readwrite("c", &SvrConfig::c)
      .def_readwrite("epsilon", &SvrConfig::epsilon)
      .def_readwrite("gamma", &SvrConfig::gamma)
      .def_readwrite("tolerance", &SvrConfig::tolerance)
      .def_readwrite("max_sweeps", &SvrConfig::max_sweeps);
  py::class_<SvrModel>(m, "SvrModel")
      .def_readonly("converged", &SvrModel::converged)
      .def_readonly("gamma", &SvrModel::gamma)
      .def_readonly("bias", &SvrModel::bias)
      .def_property_readonly("support_count",
                             [](const SvrModel& s) { return s.support_vectors.rows(); })
      .def("predict", py::overload_cast<const SvrModel&, const Vector&>(&predict));
  m.def(
      "fit_ols",
      [](const Matrix& x, const Vector& y, double ridge) { return fit_ols(dataset(x, y), ridge); },
      py::arg("features"), py::arg("labels"), py::arg("ridge") = 1e-8);
  m.def(
      "fit_svr",
      [](const Matrix& x, const Vector& y, const SvrConfig& c) { return fit_svr(dataset(x, y), c); },
      py::arg("features"), py::arg("labels"), py::arg("config") = SvrConfig{});
  m.def(
      "mse",
      [](const std::vector<double>& predictions, const Vector& labels) {
        const auto r = mse_of(predictions, labels);
        return py::make_tuple(r.mean, r.std);
      },
      py::arg("predictions"), py::arg("labels"), "Returns (mean, std) of squared errors.");

  // Scheduling and routing.
  m.def("schedule_queries", &schedule_queries, py::arg("total_steps"), py::arg("budget"),
        py::arg("warmup_steps"), py::arg("segment_length"));
  m.def(
      "route_plan",
      [](int budget, double demo_fraction, double init_share) {
        return make_route_plan(budget, demo_fraction, init_share).estimator_slot;
      },
      py::arg("budget"), py::arg("demo_fraction"), py::arg("init_share") = 0.4,
      "Per-slot flags, true where the estimator answers.");

  // Configuration and runs.
  m.def("config_keys", &config_keys);
  m.def(
      "config_text",
      [](const py::dict& overrides) {
        const RunConfig c = config_from_dict(overrides);
        validate(c);
        return config_to_text(c);
      },
      py::arg("overrides") = py::dict());
  m.def(
      "run_experiment",
      [](const std::string& run_dir, const py::dict& overrides) {
        const RunConfig config = config_from_dict(overrides);
        RunArtifacts art;
        {
          py::gil_scoped_release release;
          art = run_experiment(config, run_dir);
        }
        py::dict d;
        d["run_dir"] = art.run_dir;
        d["steps_done"] = art.steps_done;
        d["preference_count"] = art.preference_count;
        d["snapshots_published"] = art.snapshots_published;
        d["final_return_mean"] = art.final_eval.mean;
        d["final_return_std"] = art.final_eval.std;
        d["eval_returns"] = art.final_eval.returns;
        d["ledger"] = ledger_dict(art.ledger);
        return d;
      },
      py::arg("run_dir"), py::arg("overrides") = py::dict(),
      "Runs one experiment; `overrides` maps config keys to values.");
  m.def(
      "evaluate_checkpoint",
      [](const std::string& path, const std::string& env, int episodes, std::uint64_t seed) {
        const auto s = evaluate_policy(make_env_spec(env), load_policy(path), episodes, seed);
        return py::make_tuple(s.mean, s.std, s.returns);
      },
      py::arg("path"), py::arg("env") = "velocity_runner", py::arg("episodes") = 5,
      py::arg("seed") = 1, "Returns (mean, std, returns) of greedy episodes.");
  m.def(
      "load_preferences",
      [](const std::string& path) {
        py::list out;
        for (const auto& r : load_preference_db(path)) out.append(record_dict(r));
        return out;
      },
      py::arg("path"));
}
