#pragma once

// Per-character behavior networks: competence modules compete for
// execution through goal-driven activation with inertia, and a decaying
// execution threshold keeps some behavior selected eventually.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zelig/fuzzy.hpp"
#include "zelig/matrix.hpp"

namespace zelig {

inline constexpr std::string_view kPlotGoal = "plot";

struct CompetenceModule {
  std::string id;
  std::string character;
  std::vector<std::string> preconditions;  // propositions
  std::string action_id;
  std::vector<std::pair<std::string, Degree>> effects;  // "!p" marks a conflict with p
  ActionSet payload;  // actions performed when executed; defaults to {action_id}
  bool plot = false;
};

struct Goal {
  std::string id;
  std::string condition;
  double importance = 1.0;
  Degree relevance = 0.0;
};

struct NetworkParams {
  double gamma = 1.0;
  double delta = 0.8;
  double beta = 0.5;
  double theta_exec = 0.5;
  double delta_theta = 0.1;
};

struct BehaviorNetwork {
  std::string character;
  std::vector<Goal> goals;
  std::vector<CompetenceModule> modules;
  std::map<std::string, double> activation;  // by module id; absent reads 0
  double theta = 0.5;                        // current execution threshold

  [[nodiscard]] double activation_of(const std::string& module_id) const {
    auto it = activation.find(module_id);
    return it == activation.end() ? 0.0 : it->second;
  }
};

/// Upper bound of any activation: gamma * sum(importance) / (1 - beta).
[[nodiscard]] inline double activation_bound(const BehaviorNetwork& net, const NetworkParams& p) {
  double imp = 0.0;
  for (const auto& g : net.goals) imp += g.importance;
  return p.gamma * imp / (1.0 - p.beta);
}

/// Expectation degree with which the effects achieve (or, negated, undo) a condition.
[[nodiscard]] inline Degree effect_degree(const CompetenceModule& m, const std::string& condition, bool negated) {
  Degree d = 0.0;
  for (const auto& [prop, deg] : m.effects) {
    const bool neg = !prop.empty() && prop.front() == '!';
    if (neg == negated && std::string_view(prop).substr(neg ? 1 : 0) == condition) d = std::max(d, deg);
  }
  return d;
}

/// One synchronous cycle over every module:
/// a <- beta*a + sum gamma*imp*rel*match - sum delta*imp*rel*conflict, clamped.
[[nodiscard]] inline std::map<std::string, double> spread_activation(const BehaviorNetwork& net,
                                                                     const NetworkParams& p) {
  const double hi = activation_bound(net, p);
  std::map<std::string, double> out;
  for (const auto& m : net.modules) {
    double a = p.beta * net.activation_of(m.id);
    for (const auto& g : net.goals) {
      const double w = g.importance * g.relevance;
      a += p.gamma * w * effect_degree(m, g.condition, false);
      a -= p.delta * w * effect_degree(m, g.condition, true);
    }
    out[m.id] = std::clamp(a, 0.0, hi);
  }
  return out;
}

using TruthFn = std::function<Degree(const std::string&)>;

[[nodiscard]] inline Degree executability(const CompetenceModule& m, const TruthFn& truth) {
  Degree e = 1.0;
  for (const auto& pre : m.preconditions) e = combine_min(e, truth(pre));
  return e;
}

/// Argmax of activation * executability, first declared on ties. Below the
/// threshold nothing is chosen and the threshold decays; a selection resets
/// it to the base value.
[[nodiscard]] inline std::optional<std::size_t> select_behavior(BehaviorNetwork& net, const NetworkParams& p,
                                                                const TruthFn& truth) {
  std::optional<std::size_t> best;
  double best_score = 0.0;
  for (std::size_t i = 0; i < net.modules.size(); ++i) {
    const double s = net.activation_of(net.modules[i].id) * executability(net.modules[i], truth);
    if (!best || s > best_score) {
      best = i;
      best_score = s;
    }
  }
  if (best && best_score > 0.0 && best_score >= net.theta) {
    net.theta = p.theta_exec;
    return best;
  }
  net.theta = std::max(0.0, net.theta - p.delta_theta);
  return std::nullopt;
}

}  // namespace zelig
