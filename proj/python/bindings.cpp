#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pinnmcts/baselines.hpp"
#include "pinnmcts/harness.hpp"
#include "pinnmcts/mcts.hpp"
#include "pinnmcts/physnet.hpp"
#include "pinnmcts/scenario.hpp"

namespace py = pybind11;
using namespace pinnmcts;

namespace {

// JSON values cross the boundary as strings; the Python side wraps them with json.loads/dumps.
harness::ExperimentConfig config_from(const std::string& text) {
  return harness::config_from_json(nlohmann::json::parse(text));
}

py::list rows_to_py(const std::vector<harness::MetricsRow>& rows) {
  py::list out;
  for (const auto& r : rows) {
    py::dict d;
    d["experiment"] = r.experiment;
    d["seed"] = r.seed;
    d["condition"] = r.condition;
    d["mode"] = r.mode;
    d["search"] = r.search;
    d["budget"] = r.budget;
    d["train_days"] = r.train_days;
    d["horizon_h"] = r.horizon_h;
    d["mae_temp"] = r.mae_temp;
    d["mae_energy"] = r.mae_energy;
    d["daily_reward"] = r.daily_reward;
    d["cost_per_kwh"] = r.cost_per_kwh;
    d["mean_abs_temp_dev"] = r.mean_abs_temp_dev;
    d["error"] = r.error;
    out.append(d);
  }
  return out;
}

using RunFn = harness::RunOutput (*)(const harness::ExperimentConfig&, const harness::RunOptions&);

py::dict run(RunFn fn, const std::string& config, const std::string& out_dir, const std::string& name) {
  const auto cfg = config_from(config);
  harness::RunOutput res;
  {
    py::gil_scoped_release release;
    res = fn(cfg, {});
  }
  py::dict d;
  d["rows"] = rows_to_py(res.tables.at(0).rows);
  if (!out_dir.empty()) {
    py::list files;
    for (const auto& p : harness::emit_results(res.tables, out_dir, cfg, name)) files.append(p.string());
    d["files"] = files;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_pinnmcts, m) {
  m.doc() = "Heat-pump demand-response planning: forecaster, tree search and evaluation harness";
  m.attr("__version__") = PINNMCTS_VERSION;
  m.attr("ACTIONS") = std::vector<double>(kActionValues.begin(), kActionValues.end());

  m.def("reward", [](double u_phys, double price, double step_h, double T_set, double T_r, double c1, double c2) {
    return reward(u_phys, price, step_h, T_set, T_r, ComfortWeights{c1, c2});
  }, py::arg("u_phys"), py::arg("price"), py::arg("step_h"), py::arg("T_set"), py::arg("T_r"), py::arg("c1") = 0.5,
        py::arg("c2") = 0.1);
  m.def("reward_bounds", [](double max_power, double max_price, double step_h, double c1, double c2) {
    const auto n = reward_bounds(max_power, max_price, step_h, ComfortWeights{c1, c2});
    return py::make_tuple(n.rho_min, n.rho_max);
  }, py::arg("max_power"), py::arg("max_price"), py::arg("step_h") = 0.5, py::arg("c1") = 0.5, py::arg("c2") = 0.1);
  m.def("normalize_reward", [](double rho, double rho_min, double rho_max) {
    return normalize_reward(rho, RewardNormalizer{rho_min, rho_max});
  });

  m.def("bang_bang", &baselines::bang_bang);
  m.def("discrete_rule", &baselines::discrete_rule);
  m.def("continuous_rule", &baselines::continuous_rule);
  m.def("allowed_actions", [](double T_r, double T_set, double below, double above) {
    return mcts::allowed_actions(T_r, T_set, BackupBand{below, above});
  }, py::arg("T_r"), py::arg("T_set"), py::arg("delta_minus") = 1.0, py::arg("delta_plus") = 1.0);

  m.def("physics_targets", [](const std::vector<double>& T_m, const std::vector<double>& T_r, double theta) {
    return physnet::physics_targets(T_m, T_r, theta);
  });
  m.def("cumulative_noise", [](const std::vector<double>& truth, double sigma, std::uint64_t seed) {
    return cumulative_noise(truth, NoiseSpec{sigma, seed});
  });

  m.def("default_config", [] { return harness::config_to_json(harness::ExperimentConfig{}).dump(); });
  m.def("normalize_config", [](const std::string& text) { return harness::config_to_json(config_from(text)).dump(); });
  m.def("config_hash", [](const std::string& text) { return harness::hex64(harness::config_hash(config_from(text))); });

  m.def("scenario", [](const std::string& config, std::size_t days, std::uint64_t seed) {
    const auto cfg = config_from(config);
    const auto t = harness::build_scenario(cfg.scenario, days, seed);
    py::dict d;
    d["tau"] = [&] {
      std::vector<double> v(t.size());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = t.grid.hour_of_day(i);
      return v;
    }();
    d["price"] = t.lambda;
    d["T_a"] = t.T_a_true;
    d["T_a_forecast"] = t.T_a_forecast;
    d["T_set"] = t.T_set;
    d["solar"] = t.G_solar;
    d["internal_gains"] = t.I_g;
    return d;
  }, py::arg("config"), py::arg("days"), py::arg("seed"));

  m.def("forecast_eval", [](const std::string& c, const std::string& out) {
    return run(harness::run_forecast_eval, c, out, "forecast_eval");
  }, py::arg("config"), py::arg("out_dir") = "");
  m.def("control_eval", [](const std::string& c, const std::string& out) {
    return run(harness::run_control_eval, c, out, "control_eval");
  }, py::arg("config"), py::arg("out_dir") = "");
  m.def("alphazero_eval", [](const std::string& c, const std::string& out) {
    return run(harness::run_alphazero_compare, c, out, "alphazero_eval");
  }, py::arg("config"), py::arg("out_dir") = "");

  py::class_<physnet::Forecaster>(m, "Forecaster")
      .def_static("from_json", [](const std::string& text) {
        return physnet::Forecaster::from_json(nlohmann::json::parse(text));
      })
      .def("to_json", [](const physnet::Forecaster& f) { return f.to_json().dump(); })
      .def_property_readonly("theta", &physnet::Forecaster::theta)
      .def_property_readonly("window", &physnet::Forecaster::window)
      .def_property_readonly("mode", [](const physnet::Forecaster& f) { return physnet::to_string(f.mode()); })
      .def("rollout",
           [](const physnet::Forecaster& f, const std::vector<std::pair<double, double>>& history,
              const std::vector<std::pair<double, double>>& exo, const std::vector<double>& actions) {
             std::vector<physnet::BuildingState> st;
             for (const auto& [T, u] : history) st.push_back({T, u});
             std::vector<physnet::ExogenousStep> ex;
             for (const auto& [tau, Ta] : exo) ex.push_back({tau, Ta});
             const auto w = physnet::make_window(st, f.window());
             const auto r = f.rollout(w, st.back(), ex, actions);
             py::dict d;
             d["T_r"] = r.T_r;
             d["u_phys"] = r.u_phys;
             d["T_m"] = r.T_m;
             return d;
           },
           py::arg("history"), py::arg("exogenous"), py::arg("actions"),
           "history: [(T_r, u_phys_prev)] oldest first; exogenous: [(tau, T_a)] per step");
  m.def("new_forecaster", [](const std::string& mode, std::uint64_t seed) {
    physnet::ForecasterConfig c;
    c.mode = physnet::mode_from_string(mode);
    return physnet::Forecaster(c, seed);
  }, py::arg("mode") = "physnet", py::arg("seed") = 0);
}
