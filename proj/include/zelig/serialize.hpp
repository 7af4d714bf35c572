#pragma once

#include <charconv>
#include <sstream>
#include <string>

#include "zelig/script.hpp"

namespace zelig {

namespace detail {

inline constexpr std::string_view kIndentUnit = "  ";

/// Shortest decimal form that reads back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

class Writer {
 public:
  std::string str() const { return out_.str(); }

  void line(int depth, std::string_view text) {
    for (int i = 0; i < depth; ++i) out_ << kIndentUnit;
    out_ << text << '\n';
  }
  void comments(int depth, const Comments& cs) {
    for (const auto& c : cs) line(depth, "(" + c + ")");
  }
  void blank() { out_ << '\n'; }

 private:
  std::ostringstream out_;
};

inline std::string action_set_text(const ActionSet& set) {
  std::string s;
  for (std::size_t i = 0; i < set.size(); ++i) s += (i ? " & " : "") + set[i];
  return s;
}

inline std::string condition_text(const Condition& c) {
  struct Visitor {
    std::string operator()(const IntentCond& x) const { return "SAYS ~" + x.intent_id; }
    std::string operator()(const TermCond& x) const { return x.variable_id + " IS " + x.term_id; }
    std::string operator()(const TimeoutCond& x) const { return "TIMEOUT " + std::to_string(x.ticks); }
    std::string operator()(const StateCond& x) const { return x.fact.str(); }
    std::string operator()(const NotpCond&) const { return std::string(kNotp); }
  };
  return std::visit(Visitor{}, c);
}

inline std::string control_text(const Control& c) {
  switch (c.kind) {
    case ControlKind::Stay: return "STAY";
    case ControlKind::NextStep: return "NEXT";
    case ControlKind::Continue: return "CONTINUE";
    case ControlKind::Wait: return "WAIT";
    case ControlKind::Goto: return "GOTO " + c.target;
    case ControlKind::End: return "END";
  }
  return {};
}

inline std::string consequence_text(const Consequence& c) {
  std::string s;
  for (const auto& a : c.actions) {
    if (!s.empty()) s += ' ';
    s += a.bracketed ? "[" + a.action_id + "]" : a.action_id;
  }
  if (s.empty()) return control_text(c.control);
  if (c.control.kind != ControlKind::Stay) s += "; " + control_text(c.control);
  return s;
}

inline void write_block(Writer& w, const RuleBlock& block, int depth);

inline void write_rule(Writer& w, const Rule& rule, const RuleBlock& block, int depth) {
  std::string head;
  if (rule.is_notp()) {
    head = "NOTP";
    if (block.notp_mode == NotpMode::Immediate) head += " IMMEDIATE";
    if (block.notp_mode == NotpMode::After && block.notp_after) head += " AFTER " + std::to_string(*block.notp_after);
  } else {
    head = "IF " + condition_text(rule.condition);
  }
  w.line(depth, head + " THEN " + consequence_text(rule.consequence));
  w.comments(depth + 1, rule.comments);
  for (const auto& nested : rule.consequence.nested) write_block(w, nested, depth + 1);
}

inline void write_block(Writer& w, const RuleBlock& block, int depth) {
  for (const auto& r : block.rules) write_rule(w, r, block, depth);
  if (block.notp) write_rule(w, *block.notp, block, depth);
}

inline std::string facts_text(std::string_view keyword, const std::vector<Fact>& facts) {
  if (facts.empty()) return {};
  std::string s = " " + std::string(keyword);
  for (const auto& f : facts) s += " " + f.str();
  return s;
}

}  // namespace detail

/// Deterministic canonical text: fixed section order, two-space indentation,
/// comments on their own lines right after the node they belong to.
[[nodiscard]] inline std::string canonical_serialize(const ScriptDoc& doc) {
  using detail::Writer;
  Writer w;
  w.comments(0, doc.comments);
  if (!doc.title.empty()) w.line(0, "TITLE " + doc.title);
  for (const auto& inc : doc.includes) w.line(0, "INCLUDE " + inc.path);

  if (!doc.characters.empty()) {
    w.blank();
    w.line(0, "CHARACTERS");
    for (const auto& c : doc.characters) {
      std::string s = c.id;
      if (c.participant) s += " PARTICIPANT";
      if (c.offstage) s += " OFFSTAGE";
      if (!c.zone.empty()) s += " AT " + c.zone;
      for (const auto& f : c.facts) s += " " + f.predicate + "=" + f.value;
      w.line(1, s);
      w.comments(2, c.comments);
    }
  }
  if (!doc.props.empty()) {
    w.blank();
    w.line(0, "PROPS");
    for (const auto& p : doc.props) {
      std::string s = p.id;
      for (const auto& f : p.facts) s += " " + f.predicate + "=" + f.value;
      w.line(1, s);
      w.comments(2, p.comments);
    }
  }
  if (!doc.actions.empty()) {
    w.blank();
    w.line(0, "ACTIONS");
    for (const auto& a : doc.actions) {
      w.line(1, a.id + " BY " + a.performer + " " + detail::quote(a.description) +
                    detail::facts_text("PRE", a.preconditions) + detail::facts_text("EFFECT", a.effects));
      w.comments(2, a.comments);
    }
  }
  if (!doc.variables.empty()) {
    w.blank();
    w.line(0, "VARS");
    for (const auto& v : doc.variables) {
      w.line(1, "VAR " + v.variable.id + " " + detail::format_number(v.variable.lo) + " " +
                    detail::format_number(v.variable.hi));
      w.comments(2, v.comments);
      for (const auto& t : v.variable.terms) {
        std::string s = "TERM " + t.id;
        for (const auto& p : t.membership.points())
          s += " " + detail::format_number(p.x) + ":" + detail::format_number(p.mu);
        w.line(2, s);
      }
    }
  }
  if (!doc.intents.empty()) {
    w.blank();
    w.line(0, "LEXICON");
    for (const auto& i : doc.intents) {
      w.line(1, "INTENT " + i.intent.id);
      w.comments(2, i.comments);
      for (const auto& p : i.intent.phrases) w.line(2, "PHRASE " + p);
      for (const auto& g : i.intent.synonym_groups) {
        std::string s = "SYN";
        for (const auto& t : g) s += " " + t;
        w.line(2, s);
      }
    }
  }
  for (const auto& m : doc.matrices) {
    w.blank();
    std::string head = "MATRIX " + m.matrix.id + " ROWS " + m.matrix.row_variable + " COLS " + m.matrix.col_variable + ":";
    for (const auto& c : m.matrix.col_labels) head += " " + c;
    w.line(0, head);
    w.comments(1, m.comments);
    for (const auto& r : m.matrix.rows) {
      std::string s = "ROW " + r.label + ":";
      for (std::size_t i = 0; i < r.cells.size(); ++i) s += (i ? " | " : " ") + detail::action_set_text(r.cells[i]);
      w.line(1, s);
    }
    for (const auto& d : m.matrix.incompatibilities) {
      std::string s = "INCOMPAT " + d.first + " " + d.second;
      if (!d.override_actions.empty()) s += " OVERRIDE " + detail::action_set_text(d.override_actions);
      if (d.when) s += " WHEN " + d.when->str();
      w.line(1, s);
    }
  }
  if (!doc.goals.empty() || !doc.modules.empty()) {
    w.blank();
    w.line(0, "AGENTS");
    for (const auto& g : doc.goals) {
      w.line(1, "GOAL " + g.id + " FOR " + g.character + " IMPORTANCE " + detail::format_number(g.importance) +
                    " RELEVANCE " + detail::format_number(g.relevance));
      w.comments(2, g.comments);
    }
    for (const auto& m : doc.modules) {
      std::string s = "MODULE " + m.id + " FOR " + m.character + " DOES " + m.action_id;
      if (!m.preconditions.empty()) {
        s += " REQUIRES";
        for (const auto& p : m.preconditions) s += " " + p;
      }
      if (!m.effects.empty()) {
        s += " ACHIEVES";
        for (const auto& e : m.effects) s += " " + e.proposition + ":" + detail::format_number(e.degree);
      }
      w.line(1, s);
      w.comments(2, m.comments);
    }
  }
  for (const auto& sc : doc.scenes) {
    w.blank();
    w.line(0, "SCENE " + sc.id);
    w.comments(1, sc.comments);
    for (const auto& a : sc.ambient) w.line(1, "AMBIENT " + a);
    for (const auto& step : sc.steps) {
      w.line(1, "STEP " + step.id);
      w.comments(2, step.comments);
      for (const auto& item : step.items) {
        if (const auto* s = std::get_if<StatedAction>(&item.node)) {
          w.line(2, "DO " + s->action.action_id);
          w.comments(3, item.comments);
        } else if (const auto* m = std::get_if<MatrixDirective>(&item.node)) {
          w.line(2, "DECIDE " + m->matrix_id);
          w.comments(3, item.comments);
        } else if (std::holds_alternative<EndMarker>(item.node)) {
          w.line(2, "END");
          w.comments(3, item.comments);
        } else {
          detail::write_block(w, std::get<RuleBlock>(item.node), 2);
        }
      }
    }
  }
  return w.str();
}

}  // namespace zelig
