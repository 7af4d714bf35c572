#pragma once

// Abstract model of a .drama script: declarations plus scenes made of
// scene steps, each a sequence of stated actions, NOTP-terminated rule
// blocks, matrix directives and END markers.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "zelig/fuzzy.hpp"
#include "zelig/intent.hpp"
#include "zelig/matrix.hpp"
#include "zelig/world.hpp"

namespace zelig {

/// Where a node came from. Never part of model equality.
struct SourceLoc {
  std::string file;
  int line = 0;
  int column = 0;
  friend bool operator==(const SourceLoc&, const SourceLoc&) { return true; }
};

using Comments = std::vector<std::string>;

struct ActionRef {
  std::string action_id;
  bool bracketed = false;
  friend bool operator==(const ActionRef&, const ActionRef&) = default;
};

struct IntentCond {
  std::string intent_id;
  friend bool operator==(const IntentCond&, const IntentCond&) = default;
};
struct TermCond {
  std::string variable_id;
  std::string term_id;
  friend bool operator==(const TermCond&, const TermCond&) = default;
};
struct TimeoutCond {
  int ticks = 0;
  friend bool operator==(const TimeoutCond&, const TimeoutCond&) = default;
};
struct StateCond {
  Fact fact;
  friend bool operator==(const StateCond&, const StateCond&) = default;
};
struct NotpCond {
  friend bool operator==(const NotpCond&, const NotpCond&) = default;
};

using Condition = std::variant<IntentCond, TermCond, TimeoutCond, StateCond, NotpCond>;

enum class ControlKind { Stay, NextStep, Continue, Wait, Goto, End };

struct Control {
  ControlKind kind = ControlKind::Stay;
  std::string target;  // Goto only: "STEP" or "SCENE/STEP"
  friend bool operator==(const Control&, const Control&) = default;
};

struct RuleBlock;

struct Consequence {
  std::vector<ActionRef> actions;
  std::vector<RuleBlock> nested;  // zero or one nested block
  Control control;
  friend bool operator==(const Consequence&, const Consequence&) = default;
};

struct Rule {
  Condition condition;
  Consequence consequence;
  Comments comments;
  SourceLoc loc;

  [[nodiscard]] bool is_notp() const { return std::holds_alternative<NotpCond>(condition); }
  friend bool operator==(const Rule&, const Rule&) = default;
};

enum class NotpMode { Immediate, After };

struct RuleBlock {
  std::vector<Rule> rules;   // non-NOTP rules in declaration order
  std::optional<Rule> notp;  // absent only in top-level blocks of invalid scripts
  NotpMode notp_mode = NotpMode::After;
  std::optional<int> notp_after;  // unset: the runtime's default delay
  int depth = 1;
  SourceLoc loc;

  [[nodiscard]] const Rule& rule_at(std::size_t i) const { return i < rules.size() ? rules[i] : *notp; }
  friend bool operator==(const RuleBlock&, const RuleBlock&) = default;
};

struct StatedAction {
  ActionRef action;
  friend bool operator==(const StatedAction&, const StatedAction&) = default;
};
struct MatrixDirective {
  std::string matrix_id;
  friend bool operator==(const MatrixDirective&, const MatrixDirective&) = default;
};
struct EndMarker {
  friend bool operator==(const EndMarker&, const EndMarker&) = default;
};

struct StepItem {
  std::variant<StatedAction, RuleBlock, MatrixDirective, EndMarker> node;
  Comments comments;
  SourceLoc loc;
  friend bool operator==(const StepItem&, const StepItem&) = default;
};

struct SceneStep {
  std::string id;
  std::vector<StepItem> items;
  Comments comments;
  SourceLoc loc;
  friend bool operator==(const SceneStep&, const SceneStep&) = default;
};

struct Scene {
  std::string id;
  std::vector<std::string> ambient;
  std::vector<SceneStep> steps;
  Comments comments;
  SourceLoc loc;

  [[nodiscard]] const SceneStep* find_step(std::string_view step_id) const {
    for (const auto& s : steps)
      if (s.id == step_id) return &s;
    return nullptr;
  }
  friend bool operator==(const Scene&, const Scene&) = default;
};

struct CharacterDecl {
  std::string id;
  bool participant = false;
  bool offstage = false;
  std::string zone;
  std::vector<Fact> facts;  // subject is the character itself
  Comments comments;
  SourceLoc loc;
  friend bool operator==(const CharacterDecl&, const CharacterDecl&) = default;
};

struct PropDecl {
  std::string id;
  std::vector<Fact> facts;
  Comments comments;
  SourceLoc loc;
  friend bool operator==(const PropDecl&, const PropDecl&) = default;
};

struct ActionDef {
  std::string id;
  std::string performer;
  std::string description;
  std::vector<Fact> preconditions;
  std::vector<Fact> effects;
  Comments comments;
  SourceLoc loc;
  friend bool operator==(const ActionDef&, const ActionDef&) = default;
};

struct VariableDecl {
  LinguisticVariable variable;
  Comments comments;
  SourceLoc loc;
  friend bool operator==(const VariableDecl&, const VariableDecl&) = default;
};

struct MatrixDecl {
  DecisionMatrix matrix;
  Comments comments;
  SourceLoc loc;
  friend bool operator==(const MatrixDecl&, const MatrixDecl&) = default;
};

struct IntentDecl {
  Intent intent;
  Comments comments;
  SourceLoc loc;
  friend bool operator==(const IntentDecl&, const IntentDecl&) = default;
};

struct GoalDecl {
  std::string id;
  std::string character;
  double importance = 1.0;
  double relevance = 1.0;
  Comments comments;
  SourceLoc loc;
  friend bool operator==(const GoalDecl&, const GoalDecl&) = default;
};

/// A proposition with a degree: "!" prefix marks a negated effect.
struct WeightedProposition {
  std::string proposition;
  double degree = 1.0;
  friend bool operator==(const WeightedProposition&, const WeightedProposition&) = default;
};

struct ModuleDecl {
  std::string id;
  std::string character;
  std::string action_id;
  std::vector<std::string> preconditions;
  std::vector<WeightedProposition> effects;
  Comments comments;
  SourceLoc loc;
  friend bool operator==(const ModuleDecl&, const ModuleDecl&) = default;
};

struct IncludeDecl {
  std::string path;
  SourceLoc loc;
  friend bool operator==(const IncludeDecl&, const IncludeDecl&) = default;
};

struct ScriptDoc {
  std::string title;
  Comments comments;
  std::vector<IncludeDecl> includes;
  std::vector<CharacterDecl> characters;
  std::vector<PropDecl> props;
  std::vector<ActionDef> actions;
  std::vector<VariableDecl> variables;
  std::vector<IntentDecl> intents;
  std::vector<MatrixDecl> matrices;
  std::vector<GoalDecl> goals;
  std::vector<ModuleDecl> modules;
  std::vector<Scene> scenes;

  [[nodiscard]] const ActionDef* find_action(std::string_view id) const {
    for (const auto& a : actions)
      if (a.id == id) return &a;
    return nullptr;
  }
  [[nodiscard]] const LinguisticVariable* find_variable(std::string_view id) const {
    for (const auto& v : variables)
      if (v.variable.id == id) return &v.variable;
    return nullptr;
  }
  [[nodiscard]] const DecisionMatrix* find_matrix(std::string_view id) const {
    for (const auto& m : matrices)
      if (m.matrix.id == id) return &m.matrix;
    return nullptr;
  }
  [[nodiscard]] const Intent* find_intent(std::string_view id) const {
    for (const auto& i : intents)
      if (i.intent.id == id) return &i.intent;
    return nullptr;
  }
  [[nodiscard]] const Scene* find_scene(std::string_view id) const {
    for (const auto& s : scenes)
      if (s.id == id) return &s;
    return nullptr;
  }
  [[nodiscard]] const CharacterDecl* find_character(std::string_view id) const {
    for (const auto& c : characters)
      if (c.id == id) return &c;
    return nullptr;
  }
  [[nodiscard]] bool declares_entity(std::string_view id) const {
    if (find_character(id) != nullptr) return true;
    for (const auto& p : props)
      if (p.id == id) return true;
    return false;
  }
  [[nodiscard]] Lexicon lexicon() const {
    Lexicon lex;
    for (const auto& i : intents) lex.intents.push_back(i.intent);
    return lex;
  }
  friend bool operator==(const ScriptDoc&, const ScriptDoc&) = default;
};

/// World as declared by CHARACTERS and PROPS.
[[nodiscard]] inline WorldState initial_world(const ScriptDoc& doc) {
  WorldState w;
  for (const auto& c : doc.characters) {
    w.declare_character(c.id, c.participant, !c.offstage, c.zone);
    for (const auto& f : c.facts) w.set(f.subject, f.predicate, f.value);
  }
  for (const auto& p : doc.props)
    for (const auto& f : p.facts) w.set(f.subject, f.predicate, f.value);
  return w;
}

/// Calls `fn(block)` for every rule block in a step, outermost first.
template <typename Fn>
void for_each_block(const RuleBlock& block, Fn&& fn) {
  fn(block);
  for (std::size_t i = 0; i <= block.rules.size(); ++i) {
    if (i == block.rules.size() && !block.notp) break;
    for (const auto& nested : block.rule_at(i).consequence.nested) for_each_block(nested, fn);
  }
}

template <typename Fn>
void for_each_block(const SceneStep& step, Fn&& fn) {
  for (const auto& item : step.items)
    if (const auto* block = std::get_if<RuleBlock>(&item.node)) for_each_block(*block, fn);
}

}  // namespace zelig
