#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pinnmcts/baselines.hpp"
#include "pinnmcts/harness.hpp"

using namespace pinnmcts;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> budget;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "run a single seed instead of the configured list");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--budget", c.budget, "single simulation budget");
  cmd->add_flag("-q,--quiet", c.quiet, "no progress output");
}

harness::ExperimentConfig resolve(const Common& c) {
  harness::ExperimentConfig cfg = harness::load_config(c.config);
  if (c.seed) cfg.seeds = {*c.seed};
  if (c.out) cfg.output_dir = *c.out;
  if (c.budget) {
    cfg.search.budgets = {*c.budget};
    cfg.search.blackbox_budgets = {*c.budget};
    cfg.inspect.budget = *c.budget;
  }
  cfg.validate();
  return cfg;
}

harness::RunOptions options(const Common& c) {
  harness::RunOptions o;
  if (!c.quiet) {
    const auto t0 = std::chrono::steady_clock::now();
    o.log = [t0](const std::string& s) {
      const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cerr << "[" << static_cast<long>(dt) << "s] " << s << '\n';
    };
  }
  return o;
}

void report(const std::vector<std::filesystem::path>& files) {
  for (const auto& f : files) std::cout << f.string() << '\n';
}

int run_experiment(const Common& c, const std::string& name,
                   harness::RunOutput (*fn)(const harness::ExperimentConfig&, const harness::RunOptions&)) {
  const auto cfg = resolve(c);
  const auto out = fn(cfg, options(c));
  report(harness::emit_results(out.tables, cfg.output_dir, cfg, name));
  return 0;
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

int generate_data(const Common& c, bool with_models) {
  const auto cfg = resolve(c);
  const auto opts = options(c);
  std::vector<std::filesystem::path> files;
  for (std::uint64_t seed : cfg.seeds) {
    const std::filesystem::path dir = std::filesystem::path(cfg.output_dir) / ("seed_" + std::to_string(seed));
    std::filesystem::create_directories(dir);
    const harness::WarmupData warm = harness::run_warmup(cfg, seed);
    write_traces_csv(warm.traces, dir / "traces.csv");
    harness::write_steps_csv(warm.log, dir / "warmup_log.csv");
    files.push_back(dir / "traces.csv");
    files.push_back(dir / "warmup_log.csv");
    write_json(dir / "normalizer.json", {{"rho_min", warm.norm.rho_min}, {"rho_max", warm.norm.rho_max}});
    files.push_back(dir / "normalizer.json");
    if (with_models) {
      for (auto mode : cfg.forecaster.modes) {
        if (opts.log) opts.log("training " + physnet::to_string(mode) + " model for seed " + std::to_string(seed));
        const auto model = harness::train_initial(cfg, mode, warm.log, seed);
        const auto p = dir / ("model_" + physnet::to_string(mode) + ".json");
        write_json(p, model.to_json());
        files.push_back(p);
      }
    }
  }
  files.push_back(harness::emit_results({}, cfg.output_dir, cfg, "generate_data").back());
  report(files);
  return 0;
}

int inspect_tree(const Common& c) {
  const auto cfg = resolve(c);
  const auto opts = options(c);
  const std::uint64_t seed = cfg.seeds.front();
  const auto& ins = cfg.inspect;
  const harness::WarmupData warm = harness::run_warmup(cfg, seed);
  const std::size_t spd = harness::steps_per_day(cfg.scenario);
  const std::size_t offset = ins.day * spd + ins.step;
  if (offset >= cfg.protocol.test_days * spd) throw std::invalid_argument("inspect: day/step outside the test period");

  physnet::Forecaster model;
  if (!ins.checkpoint.empty()) {
    std::ifstream in(ins.checkpoint);
    if (!in) throw std::runtime_error("cannot open checkpoint " + ins.checkpoint);
    model = physnet::Forecaster::from_json(nlohmann::json::parse(in));
  } else {
    if (opts.log) opts.log("training " + ins.mode + " model on the warmup days");
    model = harness::train_initial(cfg, physnet::mode_from_string(ins.mode), warm.log, seed);
  }
  // The test period up to the inspected step is driven by the baseline controller.
  std::vector<StepRecord> log = warm.log;
  GroundTruthState state = warm.state;
  if (offset > 0) {
    const auto ep = run_episode(state, baselines::make_controller(cfg.protocol.baseline_controller), warm.traces,
                                cfg.env, offset, EpisodeOptions{cfg.band, cfg.weights}, log);
    if (ep.error) throw std::runtime_error(*ep.error);
    log.insert(log.end(), ep.steps.begin(), ep.steps.end());
    state = ep.final_state;
  }
  const ObservableState obs = observe(state, warm.traces);
  const auto scfg = harness::search_config(cfg, mcts::SearchMode::vanilla, ins.budget);
  planner::ThermalSimEnv env(model, planner::forecast_slice(warm.traces, state.step_index, scfg.max_depth + 1),
                             warm.norm, cfg.weights, cfg.band, cfg.scenario.step_h);
  const auto root = env.make_root(planner::history_window(log, obs, model.window()), obs);
  mcts::Search<planner::ThermalSimEnv> search(env, scfg);
  const mcts::SearchResult r = search.run(root);

  nlohmann::json j = planner::tree_to_json(search.tree(), ins.max_nodes);
  j["seed"] = seed;
  j["step_index"] = state.step_index;
  j["budget"] = ins.budget;
  j["chosen_action"] = r.action;
  j["chosen_u"] = kActionValues[static_cast<std::size_t>(r.action)];
  j["visit_distribution"] = r.visit_dist;
  j["observation"] = {{"tau", obs.tau},       {"T_r", obs.T_r},       {"u_phys_prev", obs.u_phys_prev},
                      {"T_a", obs.T_a},       {"lambda", obs.lambda}, {"T_set", obs.T_set}};
  std::filesystem::create_directories(cfg.output_dir);
  const auto p = std::filesystem::path(cfg.output_dir) / "tree.json";
  write_json(p, j);
  std::cout << p.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heat-pump demand-response planning: forecaster training, tree search and evaluation"};
  app.require_subcommand(1);

  Common forecast, control, alphazero, generate, inspect;
  bool with_models = false;
  add_common(app.add_subcommand("forecast-eval", "multi-step forecasting accuracy, physics-informed vs black-box"),
             forecast);
  add_common(app.add_subcommand("control-eval", "closed-loop control with vanilla tree search"), control);
  add_common(app.add_subcommand("alphazero-eval", "vanilla vs prior-guided tree search"), alphazero);
  auto* gen = app.add_subcommand("generate-data", "scenario traces, warmup log and optional model checkpoints");
  add_common(gen, generate);
  gen->add_flag("--models", with_models, "also train and save forecaster checkpoints");
  add_common(app.add_subcommand("inspect-tree", "dump one search tree as JSON"), inspect);

  CLI11_PARSE(app, argc, argv);
  try {
    if (app.got_subcommand("forecast-eval")) return run_experiment(forecast, "forecast_eval", harness::run_forecast_eval);
    if (app.got_subcommand("control-eval")) return run_experiment(control, "control_eval", harness::run_control_eval);
    if (app.got_subcommand("alphazero-eval")) {
      return run_experiment(alphazero, "alphazero_eval", harness::run_alphazero_compare);
    }
    if (app.got_subcommand("generate-data")) return generate_data(generate, with_models);
    if (app.got_subcommand("inspect-tree")) return inspect_tree(inspect);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
