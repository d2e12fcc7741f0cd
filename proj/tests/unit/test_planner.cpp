#include <gtest/gtest.h>

#include <cmath>

#include "pinnmcts/planner.hpp"

using namespace pinnmcts;
using namespace pinnmcts::planner;

namespace {

ScenarioTraces flat_traces(std::size_t n, double T_set) {
  ScenarioTraces tr;
  tr.grid = TimeGrid(0.0, 0.5, n);
  tr.lambda.assign(n, 0.1);
  for (std::size_t i = 0; i < n; ++i) tr.lambda[i] = (i / 12) % 2 ? 0.25 : 0.05;
  tr.T_a_true.assign(n, 4.0);
  tr.T_a_forecast.assign(n, 5.0);
  tr.T_set.assign(n, T_set);
  tr.G_solar.assign(n, 0.0);
  tr.I_g.assign(n, 0.0);
  return tr;
}

std::vector<StepRecord> fake_log(std::size_t n, double T_r) {
  std::vector<StepRecord> log(n);
  for (std::size_t t = 0; t < n; ++t) {
    log[t].t = t;
    log[t].obs.tau = std::fmod(0.5 * static_cast<double>(t), 24.0);
    log[t].obs.T_r = T_r + 0.1 * std::sin(0.3 * static_cast<double>(t));
    log[t].obs.u_phys_prev = 1000.0 * static_cast<double>(t % 3);
    log[t].obs.T_a = 5.0;
    log[t].obs.T_set = 21.0;
    log[t].obs.lambda = 0.1;
  }
  return log;
}

const RewardNormalizer kNorm = reward_bounds(4000.0, 0.25, 0.5, ComfortWeights{});

struct Fixture {
  physnet::Forecaster model{physnet::ForecasterConfig{}, 3};
  ScenarioTraces traces = flat_traces(200, 21.0);

  ThermalSimEnv env(std::size_t t, std::size_t depth) const {
    return ThermalSimEnv(model, forecast_slice(traces, t, depth + 1), kNorm, ComfortWeights{}, BackupBand{}, 0.5);
  }
  SimState root(const ThermalSimEnv& e, double T_r) const {
    auto log = fake_log(30, 21.0);
    ObservableState obs;
    obs.tau = 15.0;
    obs.T_r = T_r;
    obs.u_phys_prev = 500.0;
    obs.T_set = 21.0;
    return e.make_root(history_window(log, obs, 24), obs);
  }
};

mcts::SearchConfig cfg(std::size_t sims, std::size_t depth, mcts::SearchMode mode = mcts::SearchMode::vanilla) {
  mcts::SearchConfig c;
  c.n_simulations = sims;
  c.max_depth = depth;
  c.mode = mode;
  c.alpha = mcts::default_alpha(mode);
  return c;
}

}  // namespace

TEST(ForecastSlice, HoldsLastValuesPastTheEnd) {
  const auto tr = flat_traces(10, 21.0);
  const auto s = forecast_slice(tr, 8, 4);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s[0].lambda, tr.lambda[8]);
  EXPECT_EQ(s[3].lambda, tr.lambda[9]);
  EXPECT_DOUBLE_EQ(s[3].tau, 5.5);
  EXPECT_EQ(s[0].T_a, 5.0);  // forecast, not the true 4.0
}

TEST(HistoryWindow, EndsWithObservation) {
  const auto log = fake_log(30, 20.0);
  ObservableState obs;
  obs.T_r = 24.0;
  obs.u_phys_prev = 4000.0;
  const auto w = history_window(log, obs, 24);
  ASSERT_EQ(w.size(), 48u);
  EXPECT_DOUBLE_EQ(w[46], 0.8);
  EXPECT_DOUBLE_EQ(w[47], 1.0);
  EXPECT_NEAR(w[44], (log.back().obs.T_r - 20.0) / 5.0, 1e-15);
  EXPECT_THROW(history_window(fake_log(10, 20.0), obs, 24), std::invalid_argument);
}

TEST(SimEnv, ChildStateEqualsOneStepRollout) {
  Fixture f;
  const auto e = f.env(30, 6);
  const SimState r = f.root(e, 21.0);
  for (int a = 0; a < 5; ++a) {
    const auto t = e.transition(r, a);
    const std::vector<physnet::ExogenousStep> exo{{e.horizon()[0].tau, e.horizon()[0].T_a}};
    const std::vector<double> u{kActionValues[a]};
    const auto ro = f.model.rollout(r.window, physnet::BuildingState{r.T_r, r.u_prev}, exo, u);
    EXPECT_EQ(t.next.T_r, ro.T_r[0]);
    EXPECT_EQ(t.next.u_prev, ro.u_phys[0]);
    EXPECT_EQ(t.next.T_m, ro.T_m[1]);
    EXPECT_EQ(t.next.offset, 1u);
    const double rho = reward(ro.u_phys[0], e.horizon()[0].lambda, 0.5, 21.0, ro.T_r[0], ComfortWeights{});
    EXPECT_DOUBLE_EQ(t.reward, normalize_reward(rho, kNorm));
    EXPECT_GE(t.reward, 0.0);
    EXPECT_LE(t.reward, 1.0);
  }
}

TEST(SimEnv, ExpansionChildren) {
  Fixture f;
  const auto e = f.env(30, 4);
  std::vector<int> acts;
  e.allowed_actions(f.root(e, 21.0), acts);
  EXPECT_EQ(acts.size(), 5u);
  e.allowed_actions(f.root(e, 22.5), acts);
  EXPECT_EQ(acts, std::vector<int>{0});
  e.allowed_actions(f.root(e, 19.5), acts);
  EXPECT_EQ(acts, std::vector<int>{4});
}

TEST(SimEnv, AboveBandRootChoosesOff) {
  Fixture f;
  const auto e = f.env(30, 6);
  mcts::Search<ThermalSimEnv> s(e, cfg(50, 6));
  const auto r = s.run(f.root(e, 22.6));
  EXPECT_EQ(r.action, 0);
  EXPECT_EQ(s.tree().nodes[0].num_edges, 1u);
}

TEST(SimEnv, UnitPriorAlphaZeroReproducesVanilla) {
  Fixture f;
  auto e = f.env(30, 6);
  e.set_prior(PriorKind::unit);
  const SimState root = f.root(e, 21.0);
  auto az = cfg(300, 6, mcts::SearchMode::alphazero);
  az.alpha = 1.0;
  const auto rv = mcts::search(e, root, cfg(300, 6));
  const auto ra = mcts::search(e, root, az);
  EXPECT_EQ(rv.action, ra.action);
  EXPECT_EQ(rv.visit_dist, ra.visit_dist);
}

TEST(SimEnv, PriorKinds) {
  Fixture f;
  auto e = f.env(30, 6);
  const SimState root = f.root(e, 21.0);
  const std::vector<int> some{0, 2, 4};
  std::vector<double> out(5);
  e.prior(root, some, out);
  EXPECT_DOUBLE_EQ(out[2], 1.0 / 3.0);
  EXPECT_EQ(out[1], 0.0);
  const nn::Network net = make_prior_network(4);
  e.set_prior(PriorKind::network, &net);
  e.prior(root, some, out);
  EXPECT_NEAR(out[0] + out[2] + out[4], 1.0, 1e-12);
  EXPECT_EQ(out[3], 0.0);
  EXPECT_THROW(e.set_prior(PriorKind::network, nullptr), std::invalid_argument);
}

TEST(SimEnv, TreeInvariants) {
  Fixture f;
  for (std::uint64_t i = 0; i < 5; ++i) {
    const auto e = f.env(10 * i, 12);
    mcts::Search<ThermalSimEnv> s(e, cfg(200, 12));
    s.run(f.root(e, 20.2 + 0.4 * static_cast<double>(i)));
    for (const auto& n : s.tree().nodes) {
      std::uint32_t sum = 0;
      std::vector<int> allowed;
      if (n.expanded) e.allowed_actions(n.state, allowed);
      for (const auto& ed : s.tree().edges_of(n)) {
        EXPECT_GE(ed.q, 0.0);
        EXPECT_LE(ed.q, 1.0);
        EXPECT_NE(std::find(allowed.begin(), allowed.end(), ed.action), allowed.end());
        sum += ed.visits;
      }
      if (n.expanded) EXPECT_EQ(n.visits, 1 + sum);
    }
  }
}

TEST(PriorSamples, EmptySliceAndErrors) {
  Fixture f;
  const auto log = fake_log(60, 21.0);
  PlannerContext ctx{&f.model, &f.traces, kNorm, ComfortWeights{}, BackupBand{}};
  EXPECT_TRUE(collect_prior_samples(log, 40, 40, ctx, cfg(20, 4)).empty());
  EXPECT_THROW(collect_prior_samples(log, 40, 41, ctx, cfg(20, 4, mcts::SearchMode::alphazero)),
               std::invalid_argument);
  EXPECT_THROW(collect_prior_samples(log, 40, 70, ctx, cfg(20, 4)), std::out_of_range);
}

TEST(PriorSamples, TargetsAreDistributions) {
  Fixture f;
  auto log = fake_log(60, 21.0);
  log[45].obs.T_r = 23.0;  // above the band: only "off" is allowed
  PlannerContext ctx{&f.model, &f.traces, kNorm, ComfortWeights{}, BackupBand{}};
  const auto s = collect_prior_samples(log, 40, 48, ctx, cfg(60, 4));
  ASSERT_EQ(s.size(), 8u);
  for (const auto& p : s) {
    ASSERT_EQ(p.features.size(), kPriorFeatures);
    double tot = 0.0;
    for (double v : p.target) {
      EXPECT_GE(v, 0.0);
      tot += v;
    }
    EXPECT_NEAR(tot, 1.0, 1e-12);
  }
  EXPECT_EQ(s[5].target, (std::vector<double>{1.0, 0.0, 0.0, 0.0, 0.0}));
}

TEST(PriorTraining, SingleSampleIsFitted) {
  PriorSample s{{0.1, -0.3, 0.2, 0.0, -0.5, 0.4, 0.6}, {0.1, 0.6, 0.1, 0.1, 0.1}};
  PriorTrainConfig pc;
  pc.epochs = 2000;
  pc.lr = 1e-3;
  pc.seed = 2;
  const nn::Network net = train_prior({s}, pc);
  std::vector<double> p(5);
  nn::Workspace ws;
  net.infer(s.features, p, ws);
  double kl = 0.0, tot = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    kl += s.target[i] * std::log(s.target[i] / p[i]);
    tot += p[i];
  }
  EXPECT_NEAR(tot, 1.0, 1e-12);
  EXPECT_LT(kl, 0.01);
}

TEST(PriorTraining, DeterministicAndRejectsEmpty) {
  std::vector<PriorSample> data;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> t(5, 0.0);
    t[i % 5] = 1.0;
    data.push_back({std::vector<double>(7, 0.1 * i - 2.0), t});
  }
  PriorTrainConfig pc;
  pc.epochs = 5;
  pc.seed = 3;
  double la = 0.0, lb = 0.0;
  const auto a = train_prior(data, pc, &la);
  const auto b = train_prior(data, pc, &lb);
  EXPECT_EQ(la, lb);
  EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  EXPECT_THROW(train_prior({}, pc), std::invalid_argument);
}

TEST(TreeJson, Structure) {
  Fixture f;
  const auto e = f.env(30, 4);
  mcts::Search<ThermalSimEnv> s(e, cfg(25, 4));
  s.run(f.root(e, 21.0));
  const auto j = tree_to_json(s.tree());
  EXPECT_EQ(j.at("format"), "pinnmcts.tree");
  EXPECT_EQ(j.at("nodes").size(), s.tree().nodes.size());
  EXPECT_EQ(j.at("nodes")[0].at("N"), 25);
  EXPECT_EQ(j.at("nodes")[0].at("edges").size(), 5u);
  EXPECT_EQ(tree_to_json(s.tree(), 3).at("nodes").size(), 3u);
  EXPECT_EQ(tree_to_json(s.tree(), 3).at("total_nodes"), s.tree().nodes.size());
}
