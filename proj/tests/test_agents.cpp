#include <gtest/gtest.h>

#include <random>

#include "zelig/agents.hpp"
#include "zelig/loader.hpp"
#include "zelig/runtime.hpp"

using namespace zelig;

namespace {

const NetworkParams kDefaults{};

BehaviorNetwork one_goal_net(std::vector<std::pair<std::string, Degree>> relevance_by_goal,
                             std::vector<CompetenceModule> modules) {
  BehaviorNetwork net;
  net.character = "C";
  for (auto& [id, rel] : relevance_by_goal) net.goals.push_back({id, id, 1.0, rel});
  net.modules = std::move(modules);
  return net;
}

CompetenceModule module(std::string id, std::vector<std::pair<std::string, Degree>> effects,
                        std::vector<std::string> pre = {}) {
  CompetenceModule m;
  m.id = id;
  m.character = "C";
  m.action_id = id;
  m.payload = {id};
  m.effects = std::move(effects);
  m.preconditions = std::move(pre);
  return m;
}

const TruthFn kAllTrue = [](const std::string&) { return 1.0; };

// Independent iteration of the update rule, clamped below at 0 only.
double oracle_step(double a, const BehaviorNetwork& net, const CompetenceModule& m, const NetworkParams& p) {
  double next = p.beta * a;
  for (const auto& g : net.goals) {
    double match = 0.0, conflict = 0.0;
    for (const auto& [prop, deg] : m.effects) {
      if (prop == g.condition) match = std::max(match, deg);
      if (prop == "!" + g.condition) conflict = std::max(conflict, deg);
    }
    next += p.gamma * g.importance * g.relevance * match - p.delta * g.importance * g.relevance * conflict;
  }
  return std::max(0.0, next);
}

}  // namespace

TEST(SpreadActivation, GeometricSeriesToTwo) {
  auto net = one_goal_net({{"plot", 1.0}}, {module("m", {{"plot", 1.0}})});
  double expected = 0.0;
  for (int cycle = 1; cycle <= 60; ++cycle) {
    net.activation = spread_activation(net, kDefaults);
    expected = 0.5 * expected + 1.0;
    ASSERT_DOUBLE_EQ(net.activation_of("m"), expected) << cycle;
    if (cycle == 1) {
      EXPECT_DOUBLE_EQ(net.activation_of("m"), 1.0);
    }
    if (cycle == 2) {
      EXPECT_DOUBLE_EQ(net.activation_of("m"), 1.5);
    }
  }
  EXPECT_NEAR(net.activation_of("m"), 2.0, 1e-12);
}

TEST(SpreadActivation, UnmatchedModuleDecays) {
  auto net = one_goal_net({{"plot", 1.0}}, {module("m", {{"other", 1.0}})});
  net.activation["m"] = 1.6;
  for (int cycle = 1; cycle <= 30; ++cycle) {
    net.activation = spread_activation(net, kDefaults);
    ASSERT_NEAR(net.activation_of("m"), 1.6 * std::pow(0.5, cycle), 1e-15);
  }
}

TEST(SpreadActivation, HigherRelevanceDominatesAtEveryCycle) {
  auto net = one_goal_net({{"g1", 1.0}, {"g2", 0.3}}, {module("a", {{"g1", 1.0}}), module("b", {{"g2", 1.0}})});
  for (int cycle = 1; cycle <= 50; ++cycle) {
    net.activation = spread_activation(net, kDefaults);
    ASSERT_GT(net.activation_of("a"), net.activation_of("b")) << cycle;
  }
}

TEST(SpreadActivation, ConflictInhibitsAndFloorsAtZero) {
  auto net = one_goal_net({{"g", 1.0}}, {module("m", {{"!g", 1.0}})});
  net.activation["m"] = 0.5;
  net.activation = spread_activation(net, kDefaults);
  EXPECT_DOUBLE_EQ(net.activation_of("m"), 0.0);  // 0.25 - 0.8
}

TEST(SelectBehavior, ArgmaxAboveThreshold) {
  auto net = one_goal_net({}, {module("idle", {}), module("plot", {})});
  net.activation = {{"idle", 0.3}, {"plot", 0.9}};
  const auto chosen = select_behavior(net, kDefaults, kAllTrue);
  ASSERT_TRUE(chosen);
  EXPECT_EQ(net.modules[*chosen].id, "plot");
}

TEST(SelectBehavior, ExecutabilityScalesActivation) {
  auto net = one_goal_net({}, {module("a", {}, {"p"}), module("b", {})});
  net.activation = {{"a", 1.0}, {"b", 0.6}};
  const TruthFn truth = [](const std::string& p) { return p == "p" ? 0.5 : 1.0; };
  EXPECT_DOUBLE_EQ(executability(net.modules[0], truth), 0.5);
  EXPECT_EQ(net.modules[*select_behavior(net, kDefaults, truth)].id, "b");
}

TEST(SelectBehavior, ThresholdDecaysThenResets) {
  NetworkParams p;
  p.theta_exec = 0.8;
  auto net = one_goal_net({}, {module("a", {}), module("b", {})});
  net.theta = 0.8;
  net.activation = {{"a", 0.6}, {"b", 0.75}};
  EXPECT_FALSE(select_behavior(net, p, kAllTrue));
  EXPECT_DOUBLE_EQ(net.theta, 0.7);
  const auto chosen = select_behavior(net, p, kAllTrue);
  ASSERT_TRUE(chosen);
  EXPECT_EQ(net.modules[*chosen].id, "b");
  EXPECT_DOUBLE_EQ(net.theta, 0.8);
}

TEST(SelectBehavior, ThresholdFloorsAtZeroAndZeroNeverWins) {
  auto net = one_goal_net({}, {module("a", {})});
  net.theta = 0.15;
  for (int i = 0; i < 5; ++i) EXPECT_FALSE(select_behavior(net, kDefaults, kAllTrue));
  EXPECT_DOUBLE_EQ(net.theta, 0.0);
}

TEST(SelectBehavior, TiesGoToFirstDeclared) {
  auto net = one_goal_net({}, {module("first", {}), module("second", {})});
  net.activation = {{"first", 0.7}, {"second", 0.7}};
  EXPECT_EQ(net.modules[*select_behavior(net, kDefaults, kAllTrue)].id, "first");
}

TEST(SelectBehavior, NoModulesNoChoice) {
  BehaviorNetwork net;
  EXPECT_FALSE(select_behavior(net, kDefaults, kAllTrue));
}

// ---- random networks ----

namespace {

BehaviorNetwork random_network(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BehaviorNetwork net;
  net.character = "R";
  const int goals = 1 + static_cast<int>(rng() % 4);
  for (int g = 0; g < goals; ++g) net.goals.push_back({"g" + std::to_string(g), "g" + std::to_string(g), u(rng), u(rng)});
  const int modules = 1 + static_cast<int>(rng() % 6);
  for (int m = 0; m < modules; ++m) {
    std::vector<std::pair<std::string, Degree>> effects;
    for (int g = 0; g < goals; ++g) {
      switch (rng() % 3) {
        case 0: effects.emplace_back("g" + std::to_string(g), u(rng)); break;
        case 1: effects.emplace_back("!g" + std::to_string(g), u(rng)); break;
        default: break;
      }
    }
    net.modules.push_back(module("m" + std::to_string(m), effects));
  }
  return net;
}

NetworkParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {2.0 * u(rng), 2.0 * u(rng), 0.99 * u(rng), u(rng), 0.2 * u(rng)};
}

}  // namespace

TEST(AgentProperties, BoundednessOverRandomNetworks) {
  std::mt19937_64 rng(31337);
  for (int n = 0; n < 100; ++n) {
    auto net = random_network(rng);
    const auto p = random_params(rng);
    double imp = 0.0;
    for (const auto& g : net.goals) imp += g.importance;
    const double bound = p.gamma * imp / (1.0 - p.beta);
    std::map<std::string, double> oracle;
    for (int cycle = 0; cycle < 1000; ++cycle) {
      for (const auto& m : net.modules) oracle[m.id] = oracle_step(oracle[m.id], net, m, p);
      net.activation = spread_activation(net, p);
      for (const auto& m : net.modules) {
        const double a = net.activation_of(m.id);
        ASSERT_GE(a, 0.0);
        ASSERT_LE(a, bound + 1e-12);
        ASSERT_NEAR(a, oracle[m.id], 1e-9) << "network " << n << " cycle " << cycle;
      }
      (void)select_behavior(net, p, kAllTrue);
      ASSERT_GE(net.theta, 0.0);
    }
  }
}

TEST(AgentProperties, ScalingAGoalsRelevanceNeverDemotesItsModules) {
  std::mt19937_64 rng(555);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 300; ++n) {
    auto net = random_network(rng);
    const auto p = random_params(rng);
    const std::size_t gi = rng() % net.goals.size();
    const std::string g = net.goals[gi].condition;
    auto scaled = net;
    scaled.goals[gi].relevance = std::min(1.0, net.goals[gi].relevance * (1.0 + 3.0 * u(rng)));
    for (int cycle = 0; cycle < 20; ++cycle) {
      net.activation = spread_activation(net, p);
      scaled.activation = spread_activation(scaled, p);
    }
    auto matches = [&](const CompetenceModule& m) { return effect_degree(m, g, false) > 0.0; };
    auto touches = [&](const CompetenceModule& m) { return matches(m) || effect_degree(m, g, true) > 0.0; };
    for (const auto& a : net.modules) {
      if (!matches(a)) continue;
      for (const auto& b : net.modules) {
        if (touches(b)) continue;
        if (net.activation_of(a.id) >= net.activation_of(b.id)) {
          ASSERT_GE(scaled.activation_of(a.id), scaled.activation_of(b.id)) << n;
        }
      }
    }
  }
}

// ---- plot goal wiring against the runtime ----

namespace {

std::shared_ptr<const ScriptDoc> drunk() {
  static const auto doc =
      std::make_shared<const ScriptDoc>(load_script(ZELIG_SOURCE_DIR "/scripts/drunk_keys.drama"));
  return doc;
}

// Actions the agent layer would perform for `character` with NOTP at 1.
std::vector<std::string> agent_plot_choice(SessionState s, const std::string& character) {
  s.notp_level = 1.0;
  EXPECT_DOUBLE_EQ(sync_plot_goal(s), 1.0);
  for (auto& net : s.agents) {
    if (net.character != character) continue;
    for (int cycle = 0; cycle < 10; ++cycle) {
      net.activation = spread_activation(net, s.config.agents);
      const auto chosen = select_behavior(net, s.config.agents, [&](const std::string& p) { return proposition_truth(s, p); });
      if (chosen) {
        EXPECT_TRUE(net.modules[*chosen].plot);
        return net.modules[*chosen].payload;
      }
    }
  }
  return {};
}

// Actions the runtime logs when the current block's NOTP fires under ticks.
std::vector<std::string> runtime_notp(SessionState s) {
  const std::string step = s.step_id;
  for (std::int64_t t = s.clock + 1; t < s.clock + 100; ++t) {
    const auto added = apply_event(s, Event::tick(t));
    std::vector<std::string> out;
    for (const auto& e : added)
      if (e.step == "Sc1/" + step && (e.cause == Cause::Notp || e.cause == Cause::Bracket)) out.push_back(e.action_id);
    if (!out.empty()) return out;
  }
  return {};
}

}  // namespace

TEST(PlotGoal, AgentsAgreeWithNotpAtTheExtremes) {
  auto s = start_session(drunk(), {}, 0);
  apply_event(s, Event::tick(1));
  ASSERT_EQ(s.step_id, "SS2");
  EXPECT_EQ(agent_plot_choice(s, "POLICEMAN"), runtime_notp(s));
  EXPECT_EQ(agent_plot_choice(s, "POLICEMAN"), (std::vector<std::string>{"policeman_arrives_asks"}));

  // SS3 entered through the intent path: the policeman is still off stage.
  auto via_intent = s;
  apply_event(via_intent, Event::utterance(2, "what is the problem"));
  ASSERT_EQ(via_intent.step_id, "SS3");
  EXPECT_EQ(agent_plot_choice(via_intent, "POLICEMAN"), runtime_notp(via_intent));
  EXPECT_EQ(runtime_notp(via_intent), (std::vector<std::string>{"policeman_enters", "policeman_joins_asks_help"}));

  // SS3 entered through the NOTP path: no bracket is needed.
  auto via_notp = s;
  for (std::int64_t t = 2; via_notp.step_id == "SS2"; ++t) apply_event(via_notp, Event::tick(t));
  EXPECT_EQ(agent_plot_choice(via_notp, "POLICEMAN"), runtime_notp(via_notp));
  EXPECT_EQ(runtime_notp(via_notp), (std::vector<std::string>{"policeman_joins_asks_help"}));
}

TEST(PlotGoal, ActiveParticipantSilencesThePlotGoal) {
  auto s = start_session(drunk(), {}, 0);
  apply_event(s, Event::tick(1));
  s.notp_level = 0.0;
  EXPECT_DOUBLE_EQ(sync_plot_goal(s), 0.0);
  for (auto& net : s.agents) {
    for (const auto& g : net.goals) {
      if (g.id == kPlotGoal) {
        EXPECT_DOUBLE_EQ(g.relevance, 0.0);
      }
    }
    net.activation.clear();
    for (int cycle = 0; cycle < 10; ++cycle) {
      net.activation = spread_activation(net, s.config.agents);
      const auto c = select_behavior(net, s.config.agents, [&](const std::string& p) { return proposition_truth(s, p); });
      for (const auto& m : net.modules) {
        if (m.plot) {
          EXPECT_DOUBLE_EQ(net.activation_of(m.id), 0.0);
        }
      }
      if (c) {
        EXPECT_FALSE(net.modules[*c].plot) << net.character;
      }
    }
  }
}

TEST(PlotGoal, NoIdleModulesMeansNoChoiceWhilePlotIsSilent) {
  auto doc = *drunk();
  doc.modules.clear();
  doc.goals.clear();
  auto s = start_session(doc, {}, 0);
  apply_event(s, Event::tick(1));
  s.notp_level = 0.0;
  sync_plot_goal(s);
  for (auto& net : s.agents) {
    net.activation.clear();
    for (int cycle = 0; cycle < 10; ++cycle) {
      net.activation = spread_activation(net, s.config.agents);
      EXPECT_FALSE(select_behavior(net, s.config.agents, kAllTrue));
    }
  }
}

TEST(PlotGoal, IdleBehaviorIsLoggedOnlyWhenAgentsAct) {
  for (bool acting : {false, true}) {
    RuntimeConfig c;
    c.agents_act = acting;
    c.tau_notp = 1000;
    auto s = start_session(drunk(), c, 0);
    std::vector<ActionLogEntry> agent_entries;
    for (std::int64_t t = 1; t <= 30; ++t) {
      for (const auto& e : apply_event(s, Event::tick(t)))
        if (e.cause == Cause::Agent) agent_entries.push_back(e);
      ASSERT_EQ(s.arbitration.size(), s.agents.size());
    }
    if (!acting) {
      EXPECT_TRUE(agent_entries.empty());
      continue;
    }
    ASSERT_FALSE(agent_entries.empty());
    for (const auto& e : agent_entries) {
      EXPECT_EQ(e.action_id, "drunk_mumbles");  // the policeman is off stage
      EXPECT_EQ(e.source, "agent/DRUNK/drunk_mumbling");
    }
  }
}
