#pragma once

// Static checks over a parsed (and include-merged) script. Findings are
// data: an empty error list means the script can be run.

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "zelig/matrix.hpp"
#include "zelig/script.hpp"
#include "zelig/serialize.hpp"

namespace zelig {

enum class Severity { Error, Warning };

enum class FindingCode {
  MissingNotp,
  UnreachableStep,
  UnresolvedRef,
  NoEndReachable,
  IncompleteMatrix,
  UnfirableRule,
  Incompatibility,
  MissingParticipant,
};

[[nodiscard]] inline std::string_view to_string(FindingCode c) {
  switch (c) {
    case FindingCode::MissingNotp: return "MissingNotp";
    case FindingCode::UnreachableStep: return "UnreachableStep";
    case FindingCode::UnresolvedRef: return "UnresolvedRef";
    case FindingCode::NoEndReachable: return "NoEndReachable";
    case FindingCode::IncompleteMatrix: return "IncompleteMatrix";
    case FindingCode::UnfirableRule: return "UnfirableRule";
    case FindingCode::Incompatibility: return "Incompatibility";
    case FindingCode::MissingParticipant: return "MissingParticipant";
  }
  return "?";
}

[[nodiscard]] inline std::string_view to_string(Severity s) { return s == Severity::Error ? "error" : "warning"; }

struct Finding {
  Severity severity = Severity::Error;
  FindingCode code = FindingCode::UnresolvedRef;
  SourceLoc loc;
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;

  [[nodiscard]] std::size_t error_count() const {
    std::size_t n = 0;
    for (const auto& f : findings) n += f.severity == Severity::Error;
    return n;
  }
  [[nodiscard]] std::size_t count(FindingCode code) const {
    std::size_t n = 0;
    for (const auto& f : findings) n += f.code == code;
    return n;
  }
  [[nodiscard]] bool ok() const { return error_count() == 0; }
};

/// Step address inside a document.
struct StepRef {
  std::size_t scene = 0;
  std::size_t step = 0;
  friend auto operator<=>(const StepRef&, const StepRef&) = default;
};

/// Resolves "STEP" (within `from`'s scene) or "SCENE/STEP".
[[nodiscard]] inline std::optional<StepRef> resolve_step(const ScriptDoc& doc, std::size_t from_scene,
                                                         std::string_view target) {
  std::size_t scene = from_scene;
  std::string_view step = target;
  if (const auto slash = target.find('/'); slash != std::string_view::npos) {
    const Scene* sc = doc.find_scene(target.substr(0, slash));
    if (sc == nullptr) return std::nullopt;
    scene = static_cast<std::size_t>(sc - doc.scenes.data());
    step = target.substr(slash + 1);
  }
  if (scene >= doc.scenes.size()) return std::nullopt;
  const auto& steps = doc.scenes[scene].steps;
  for (std::size_t i = 0; i < steps.size(); ++i)
    if (steps[i].id == step) return StepRef{scene, i};
  return std::nullopt;
}

/// Step following `s` in script order (next scene's first step at a scene
/// boundary); nullopt past the last step.
[[nodiscard]] inline std::optional<StepRef> next_step(const ScriptDoc& doc, StepRef s) {
  if (s.step + 1 < doc.scenes[s.scene].steps.size()) return StepRef{s.scene, s.step + 1};
  for (std::size_t sc = s.scene + 1; sc < doc.scenes.size(); ++sc)
    if (!doc.scenes[sc].steps.empty()) return StepRef{sc, 0};
  return std::nullopt;
}

/// Whether a rule's condition can ever reach a non-zero degree.
[[nodiscard]] inline bool rule_firable(const ScriptDoc& doc, const Rule& rule) {
  if (const auto* t = std::get_if<TermCond>(&rule.condition)) {
    const auto* var = doc.find_variable(t->variable_id);
    const Term* term = var ? var->find(t->term_id) : nullptr;
    return term != nullptr && term->membership.peak() > 0.0;
  }
  if (const auto* s = std::get_if<StateCond>(&rule.condition)) {
    const Fact& f = s->fact;
    const auto* c = doc.find_character(f.subject);
    if (c != nullptr && c->participant && f.predicate == kZone) return true;  // set by Move events
    if (initial_world(doc).holds(f)) return true;
    for (const auto& a : doc.actions)
      for (const auto& e : a.effects)
        if (e == f) return true;
    return false;
  }
  return true;
}

/// Where control can go when a step is left.
struct StepExit {
  bool end = false;            // reaches an END marker or END control
  bool falls_off = false;      // runs past the last step without END
  std::set<StepRef> successors;
};

namespace detail {

class ExitAnalysis {
 public:
  ExitAnalysis(const ScriptDoc& doc, StepRef at) : doc_(doc), at_(at), step_(doc.scenes[at.scene].steps[at.step]) {}

  StepExit run() {
    from_item(0);
    return exit_;
  }

 private:
  void proceed_to_next_step() {
    if (auto n = next_step(doc_, at_))
      exit_.successors.insert(*n);
    else
      exit_.falls_off = true;
  }

  // Entry or CONTINUE: execute items from `i` until a block or END.
  void from_item(std::size_t i) {
    for (; i < step_.items.size(); ++i) {
      const auto& node = step_.items[i].node;
      if (std::holds_alternative<EndMarker>(node)) {
        exit_.end = true;
        return;
      }
      if (const auto* block = std::get_if<RuleBlock>(&node)) {
        block_exits(*block, {}, i);
        return;
      }
    }
    proceed_to_next_step();
  }

  // NEXT/GOTO run the remaining stated actions and stop at END.
  void trailing(std::size_t top_item, const std::function<void()>& then) {
    for (std::size_t i = top_item + 1; i < step_.items.size(); ++i) {
      if (std::holds_alternative<EndMarker>(step_.items[i].node)) {
        exit_.end = true;
        return;
      }
    }
    then();
  }

  void apply_control(const Control& c, std::vector<const Control*> parents, std::size_t top_item) {
    switch (c.kind) {
      case ControlKind::Stay:
      case ControlKind::Wait:
        return;
      case ControlKind::End:
        exit_.end = true;
        return;
      case ControlKind::NextStep:
        trailing(top_item, [&] { proceed_to_next_step(); });
        return;
      case ControlKind::Goto:
        trailing(top_item, [&] {
          if (auto t = resolve_step(doc_, at_.scene, c.target)) exit_.successors.insert(*t);
        });
        return;
      case ControlKind::Continue:
        if (parents.empty()) {
          from_item(top_item + 1);
        } else {
          const Control* parent = parents.back();
          parents.pop_back();
          apply_control(*parent, std::move(parents), top_item);
        }
        return;
    }
  }

  void block_exits(const RuleBlock& block, const std::vector<const Control*>& parents, std::size_t top_item) {
    for (std::size_t r = 0; r <= block.rules.size(); ++r) {
      if (r == block.rules.size() && !block.notp) break;
      const Rule& rule = block.rule_at(r);
      if (!rule.is_notp() && !rule_firable(doc_, rule)) continue;
      if (!rule.consequence.nested.empty()) {
        auto inner = parents;
        inner.push_back(&rule.consequence.control);
        block_exits(rule.consequence.nested.front(), inner, top_item);
      } else {
        apply_control(rule.consequence.control, parents, top_item);
      }
    }
  }

  const ScriptDoc& doc_;
  StepRef at_;
  const SceneStep& step_;
  StepExit exit_;
};

}  // namespace detail

[[nodiscard]] inline StepExit step_exits(const ScriptDoc& doc, StepRef at) { return detail::ExitAnalysis(doc, at).run(); }

struct Reachability {
  std::set<StepRef> reachable;
  bool end_reachable = false;
};

/// BFS over the step graph from the first step of the first scene.
[[nodiscard]] inline Reachability reachability(const ScriptDoc& doc) {
  Reachability r;
  if (doc.scenes.empty() || doc.scenes.front().steps.empty()) return r;
  std::deque<StepRef> queue{StepRef{0, 0}};
  r.reachable.insert(queue.front());
  while (!queue.empty()) {
    const StepRef s = queue.front();
    queue.pop_front();
    const StepExit e = step_exits(doc, s);
    r.end_reachable |= e.end;
    for (const auto& n : e.successors)
      if (r.reachable.insert(n).second) queue.push_back(n);
  }
  return r;
}

namespace detail {

class Validator {
 public:
  explicit Validator(const ScriptDoc& doc) : doc_(doc) {}

  ValidationReport run() {
    participants();
    actions();
    matrices();
    agents();
    scenes();
    reach();
    return std::move(report_);
  }

 private:
  void add(Severity s, FindingCode c, const SourceLoc& loc, std::string msg) {
    report_.findings.push_back({s, c, loc, std::move(msg)});
  }
  void error(FindingCode c, const SourceLoc& loc, std::string msg) { add(Severity::Error, c, loc, std::move(msg)); }
  void unresolved(const SourceLoc& loc, std::string_view kind, const std::string& id) {
    error(FindingCode::UnresolvedRef, loc, "unknown " + std::string(kind) + " '" + id + "'");
  }

  SourceLoc doc_loc() const {
    if (!doc_.scenes.empty()) return doc_.scenes.front().loc;
    if (!doc_.characters.empty()) return doc_.characters.front().loc;
    return {"", 1, 1};
  }

  void participants() {
    std::size_t n = 0;
    for (const auto& c : doc_.characters) {
      if (!c.participant) continue;
      ++n;
      if (c.offstage) error(FindingCode::MissingParticipant, c.loc, "participant '" + c.id + "' cannot be OFFSTAGE");
      if (n > 1) error(FindingCode::MissingParticipant, c.loc, "more than one PARTICIPANT declared");
    }
    if (n == 0) error(FindingCode::MissingParticipant, doc_loc(), "no character is declared PARTICIPANT");
  }

  void check_fact(const Fact& f, const SourceLoc& loc) {
    if (!doc_.declares_entity(f.subject)) unresolved(loc, "entity", f.subject);
  }

  void check_action(const std::string& id, const SourceLoc& loc) {
    if (doc_.find_action(id) == nullptr) unresolved(loc, "action", id);
  }

  void actions() {
    for (const auto& a : doc_.actions) {
      if (doc_.find_character(a.performer) == nullptr) unresolved(a.loc, "character", a.performer);
      for (const auto& f : a.preconditions) check_fact(f, a.loc);
      for (const auto& f : a.effects) {
        check_fact(f, a.loc);
        const auto* c = doc_.find_character(f.subject);
        if (c && c->participant && f.predicate == kOnStage && f.value != "true")
          error(FindingCode::MissingParticipant, a.loc, "action '" + a.id + "' would take the participant off stage");
      }
    }
  }

  void matrices() {
    for (const auto& d : doc_.matrices) {
      const auto& m = d.matrix;
      const auto* rv = doc_.find_variable(m.row_variable);
      const auto* cv = doc_.find_variable(m.col_variable);
      if (rv == nullptr) unresolved(d.loc, "variable", m.row_variable);
      if (cv == nullptr) unresolved(d.loc, "variable", m.col_variable);
      if (rv != nullptr && cv != nullptr) {
        std::vector<std::string> want_rows, want_cols;
        for (const auto& t : rv->terms) want_rows.push_back(t.id);
        for (const auto& t : cv->terms) want_cols.push_back(t.id);
        want_rows.emplace_back(kNotp);
        want_cols.emplace_back(kNotp);
        for (const auto& c : want_cols)
          if (std::find(m.col_labels.begin(), m.col_labels.end(), c) == m.col_labels.end())
            error(FindingCode::IncompleteMatrix, d.loc, "matrix '" + m.id + "' has no column for '" + c + "'");
        for (const auto& c : m.col_labels)
          if (std::find(want_cols.begin(), want_cols.end(), c) == want_cols.end())
            unresolved(d.loc, "term of " + m.col_variable, c);
        for (const auto& r : want_rows) {
          bool found = false;
          for (const auto& row : m.rows) found |= row.label == r;
          if (!found) error(FindingCode::IncompleteMatrix, d.loc, "matrix '" + m.id + "' has no row for '" + r + "'");
        }
        for (const auto& row : m.rows)
          if (std::find(want_rows.begin(), want_rows.end(), row.label) == want_rows.end())
            unresolved(d.loc, "term of " + m.row_variable, row.label);
      }
      for (const auto& row : m.rows) {
        if (row.cells.size() != m.col_labels.size())
          error(FindingCode::IncompleteMatrix, d.loc,
                "matrix '" + m.id + "' row '" + row.label + "' has " + std::to_string(row.cells.size()) +
                    " cells, expected " + std::to_string(m.col_labels.size()));
        for (const auto& cell : row.cells)
          for (const auto& a : cell) check_action(a, d.loc);
      }
      for (const auto& inc : m.incompatibilities) {
        check_action(inc.first, d.loc);
        check_action(inc.second, d.loc);
        for (const auto& a : inc.override_actions) check_action(a, d.loc);
        if (inc.when) check_fact(*inc.when, d.loc);
      }
      for (const auto& f : detect_incompatibilities(m, m.incompatibilities)) {
        std::string msg = "matrix '" + m.id + "' cell (" + f.row + ", " + f.col + ")";
        if (f.other_cell) msg += " with cell (" + f.other_cell->first + ", " + f.other_cell->second + ")";
        msg += " can fire incompatible actions " + f.first + " & " + f.second;
        msg += f.override_actions.empty() ? " and no override is declared"
                                          : "; apply override " + action_set_text(f.override_actions);
        error(FindingCode::Incompatibility, d.loc, std::move(msg));
      }
    }
  }

  void agents() {
    for (const auto& g : doc_.goals)
      if (doc_.find_character(g.character) == nullptr) unresolved(g.loc, "character", g.character);
    for (const auto& m : doc_.modules) {
      if (doc_.find_character(m.character) == nullptr) unresolved(m.loc, "character", m.character);
      check_action(m.action_id, m.loc);
    }
  }

  void check_rule(const Rule& rule, std::size_t scene) {
    std::visit(
        [&](const auto& c) {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, IntentCond>) {
            if (doc_.find_intent(c.intent_id) == nullptr) unresolved(rule.loc, "intent", c.intent_id);
          } else if constexpr (std::is_same_v<T, TermCond>) {
            const auto* v = doc_.find_variable(c.variable_id);
            if (v == nullptr)
              unresolved(rule.loc, "variable", c.variable_id);
            else if (v->find(c.term_id) == nullptr)
              unresolved(rule.loc, "term of " + c.variable_id, c.term_id);
          } else if constexpr (std::is_same_v<T, StateCond>) {
            check_fact(c.fact, rule.loc);
          } else if constexpr (std::is_same_v<T, TimeoutCond>) {
            if (c.ticks < 1) error(FindingCode::UnfirableRule, rule.loc, "TIMEOUT must be at least 1 tick");
          }
        },
        rule.condition);
    if (!rule.is_notp() && !rule_firable(doc_, rule))
      add(Severity::Warning, FindingCode::UnfirableRule, rule.loc,
          "condition '" + condition_text(rule.condition) + "' can never be satisfied");
    for (const auto& a : rule.consequence.actions) check_action(a.action_id, rule.loc);
    if (rule.consequence.control.kind == ControlKind::Goto && !resolve_step(doc_, scene, rule.consequence.control.target))
      unresolved(rule.loc, "step", rule.consequence.control.target);
  }

  void scenes() {
    for (std::size_t s = 0; s < doc_.scenes.size(); ++s) {
      for (const auto& step : doc_.scenes[s].steps) {
        for (const auto& item : step.items) {
          if (const auto* st = std::get_if<StatedAction>(&item.node)) check_action(st->action.action_id, item.loc);
          if (const auto* md = std::get_if<MatrixDirective>(&item.node))
            if (doc_.find_matrix(md->matrix_id) == nullptr) unresolved(item.loc, "matrix", md->matrix_id);
        }
        for_each_block(step, [&](const RuleBlock& block) {
          if (!block.notp)
            error(FindingCode::MissingNotp, block.loc,
                  "rule block in " + doc_.scenes[s].id + "/" + step.id + " does not end with NOTP");
          for (const auto& r : block.rules) check_rule(r, s);
          if (block.notp) check_rule(*block.notp, s);
        });
      }
    }
  }

  void reach() {
    if (doc_.scenes.empty()) {
      error(FindingCode::NoEndReachable, doc_loc(), "script has no scenes");
      return;
    }
    const auto r = reachability(doc_);
    if (!r.end_reachable)
      error(FindingCode::NoEndReachable, doc_.scenes.front().loc, "no END is reachable from the first step");
    for (std::size_t s = 0; s < doc_.scenes.size(); ++s)
      for (std::size_t i = 0; i < doc_.scenes[s].steps.size(); ++i)
        if (!r.reachable.contains(StepRef{s, i}))
          add(Severity::Warning, FindingCode::UnreachableStep, doc_.scenes[s].steps[i].loc,
              "step " + doc_.scenes[s].id + "/" + doc_.scenes[s].steps[i].id + " is unreachable");
  }

  const ScriptDoc& doc_;
  ValidationReport report_;
};

}  // namespace detail

[[nodiscard]] inline ValidationReport validate_script(const ScriptDoc& doc) { return detail::Validator(doc).run(); }

}  // namespace zelig
