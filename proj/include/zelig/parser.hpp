#pragma once

// Line-oriented, indentation-structured parser for .drama scripts.
//
//   TITLE <text>
//   INCLUDE <path>
//   CHARACTERS / PROPS / ACTIONS / VARS / LEXICON / AGENTS   (sections)
//   MATRIX <id> ROWS <var> COLS <var>: <col labels...>
//   SCENE <id>
//     AMBIENT <text>
//     STEP <id>
//       DO <action> | DECIDE <matrix> | END
//       IF <condition> THEN <actions> [; <control>]
//       NOTP [IMMEDIATE | AFTER <n>] THEN <actions> [; <control>]
//
// Text in parentheses outside quotes is a comment and attaches to the
// nearest preceding node. Indentation nests; any consistent width works.

#include <charconv>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "zelig/script.hpp"

namespace zelig {

class ParseError : public std::runtime_error {
 public:
  ParseError(SourceLoc loc, const std::string& message)
      : std::runtime_error(loc.file + ":" + std::to_string(loc.line) + ":" + std::to_string(loc.column) + ": " +
                           message),
        loc_(std::move(loc)),
        message_(message) {}

  [[nodiscard]] const SourceLoc& loc() const { return loc_; }
  [[nodiscard]] const std::string& message() const { return message_; }

 private:
  SourceLoc loc_;
  std::string message_;
};

namespace detail {

struct Line {
  int number = 0;
  int indent = 0;
  std::string code;  // comments blanked out, so columns match the source
  Comments comments;
};

struct Node {
  Line line;
  std::vector<Node> children;
};

struct Token {
  std::string text;
  int col = 1;
  bool quoted = false;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline bool is_id(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (!(std::isalnum(u) || c == '_' || c == '-' || c == '.')) return false;
  }
  return true;
}

class Parser {
 public:
  Parser(std::string_view source, std::string file) : source_(source), file_(std::move(file)) {}

  ScriptDoc run() {
    for (auto& node : build_tree(lex())) top_level(node);
    return std::move(doc_);
  }

 private:
  [[noreturn]] void fail(int line, int col, const std::string& msg) const { throw ParseError({file_, line, col}, msg); }
  [[noreturn]] void fail(const Line& l, const std::string& msg) const { fail(l.number, l.indent + 1, msg); }
  [[noreturn]] void fail(const Line& l, const Token& t, const std::string& msg) const { fail(l.number, t.col, msg); }

  SourceLoc loc(const Line& l) const { return {file_, l.number, l.indent + 1}; }

  // ---- lexing ----

  std::vector<Line> lex() {
    std::vector<Line> lines;
    int number = 0;
    std::size_t pos = 0;
    while (pos <= source_.size()) {
      auto nl = source_.find('\n', pos);
      if (nl == std::string_view::npos) nl = source_.size();
      std::string raw(source_.substr(pos, nl - pos));
      pos = nl + 1;
      ++number;
      if (!raw.empty() && raw.back() == '\r') raw.pop_back();
      Line line = split_comments(raw, number);
      if (trim(line.code).empty()) {
        if (!line.comments.empty()) {
          auto& target = lines.empty() ? doc_.comments : lines.back().comments;
          target.insert(target.end(), line.comments.begin(), line.comments.end());
        }
        continue;
      }
      int indent = 0;
      for (char c : line.code) {
        if (c == ' ')
          ++indent;
        else if (c == '\t')
          indent = (indent / 4 + 1) * 4;
        else
          break;
      }
      line.indent = indent;
      lines.push_back(std::move(line));
      if (nl == source_.size()) break;
    }
    return lines;
  }

  Line split_comments(const std::string& raw, int number) const {
    Line line;
    line.number = number;
    line.code = raw;
    bool quoted = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const char c = raw[i];
      if (quoted) {
        if (c == '\\' && i + 1 < raw.size())
          ++i;
        else if (c == '"')
          quoted = false;
        continue;
      }
      if (c == '"') {
        quoted = true;
      } else if (c == '(') {
        int depth = 1;
        std::size_t j = i + 1;
        for (; j < raw.size() && depth > 0; ++j) {
          if (raw[j] == '(') ++depth;
          if (raw[j] == ')') --depth;
        }
        if (depth != 0) fail(number, static_cast<int>(i) + 1, "unterminated comment");
        line.comments.push_back(trim(std::string_view(raw).substr(i + 1, j - i - 2)));
        for (std::size_t k = i; k < j; ++k) line.code[k] = ' ';
        i = j - 1;
      } else if (c == ')') {
        fail(number, static_cast<int>(i) + 1, "unbalanced ')'");
      }
    }
    if (quoted) fail(number, static_cast<int>(raw.find('"')) + 1, "unterminated string");
    while (!line.code.empty() && (line.code.back() == ' ' || line.code.back() == '\t')) line.code.pop_back();
    return line;
  }

  std::vector<Node> build_tree(std::vector<Line> lines) const {
    std::vector<Node> roots;
    std::vector<int> indents{0};
    std::vector<std::vector<Node>*> containers{&roots};
    for (auto& line : lines) {
      if (line.indent > indents.back()) {
        if (containers.back()->empty()) fail(line, "dangling indentation");
        auto* parent = &containers.back()->back();
        indents.push_back(line.indent);
        containers.push_back(&parent->children);
      } else {
        while (line.indent < indents.back()) {
          indents.pop_back();
          containers.pop_back();
        }
        if (line.indent != indents.back()) fail(line, "dangling indentation");
      }
      containers.back()->push_back(Node{std::move(line), {}});
    }
    return roots;
  }

  std::vector<Token> tokenize(const Line& l) const {
    std::vector<Token> out;
    const std::string& s = l.code;
    std::size_t i = 0;
    while (i < s.size()) {
      if (s[i] == ' ' || s[i] == '\t') {
        ++i;
        continue;
      }
      Token t;
      t.col = static_cast<int>(i) + 1;
      if (s[i] == '"') {
        t.quoted = true;
        ++i;
        while (i < s.size() && s[i] != '"') {
          if (s[i] == '\\' && i + 1 < s.size()) ++i;
          t.text.push_back(s[i++]);
        }
        ++i;
      } else if (s[i] == ';' || s[i] == '&' || s[i] == '|') {
        t.text = std::string(1, s[i++]);
      } else {
        while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != ';' && s[i] != '"' && s[i] != '&' &&
               s[i] != '|')
          t.text.push_back(s[i++]);
      }
      out.push_back(std::move(t));
    }
    return out;
  }

  std::string rest_after_keyword(const Line& l, std::string_view keyword) const {
    const auto at = l.code.find(keyword);
    return trim(std::string_view(l.code).substr(at + keyword.size()));
  }

  // ---- helpers ----

  void no_children(const Node& n) const {
    if (!n.children.empty()) fail(n.children.front().line, "dangling indentation");
  }

  std::string expect_id(const Line& l, const std::vector<Token>& toks, std::size_t i, std::string_view what) const {
    if (i >= toks.size()) fail(l, "missing " + std::string(what));
    if (toks[i].quoted || !is_id(toks[i].text)) fail(l, toks[i], "invalid " + std::string(what) + " '" + toks[i].text + "'");
    return toks[i].text;
  }

  double number(const Line& l, const Token& t) const {
    double v = 0.0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc{} || p != t.text.data() + t.text.size()) fail(l, t, "expected a number, got '" + t.text + "'");
    return v;
  }

  int integer(const Line& l, const Token& t) const {
    int v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc{} || p != t.text.data() + t.text.size() || v < 0)
      fail(l, t, "expected a non-negative integer, got '" + t.text + "'");
    return v;
  }

  Fact fact(const Line& l, const Token& t) const {
    auto f = parse_fact(t.text);
    if (!f || !is_id(f->subject) || !is_id(f->predicate) || !is_id(f->value))
      fail(l, t, "malformed fact '" + t.text + "', expected SUBJECT.predicate=value");
    return *f;
  }

  void claim(std::set<std::string>& seen, const std::string& id, const Line& l, std::string_view kind) const {
    if (!seen.insert(id).second) fail(l, "duplicate " + std::string(kind) + " id '" + id + "'");
  }

  static void take_comments(Comments& into, const Node& n) {
    into.insert(into.end(), n.line.comments.begin(), n.line.comments.end());
  }

  // ---- top level ----

  void top_level(const Node& n) {
    const auto toks = tokenize(n.line);
    const std::string& kw = toks.front().text;
    if (kw == "TITLE") {
      no_children(n);
      doc_.title = rest_after_keyword(n.line, "TITLE");
      take_comments(doc_.comments, n);
    } else if (kw == "INCLUDE") {
      no_children(n);
      if (toks.size() != 2) fail(n.line, "INCLUDE takes exactly one path");
      doc_.includes.push_back({toks[1].text, loc(n.line)});
      take_comments(doc_.comments, n);
    } else if (kw == "CHARACTERS" || kw == "PROPS" || kw == "ACTIONS" || kw == "VARS" || kw == "LEXICON" ||
               kw == "AGENTS") {
      if (toks.size() != 1) fail(n.line, toks[1], "unexpected text after " + kw);
      take_comments(doc_.comments, n);
      for (const auto& child : n.children) section_entry(kw, child);
    } else if (kw == "MATRIX") {
      matrix(n);
    } else if (kw == "SCENE") {
      scene(n);
    } else {
      fail(n.line, toks.front(), "unknown keyword '" + kw + "'");
    }
  }

  void section_entry(const std::string& section, const Node& n) {
    if (section == "CHARACTERS")
      character(n);
    else if (section == "PROPS")
      prop(n);
    else if (section == "ACTIONS")
      action(n);
    else if (section == "VARS")
      variable(n);
    else if (section == "LEXICON")
      intent(n);
    else
      agent_entry(n);
  }

  void character(const Node& n) {
    no_children(n);
    const auto toks = tokenize(n.line);
    CharacterDecl c;
    c.id = expect_id(n.line, toks, 0, "character id");
    claim(entities_, c.id, n.line, "entity");
    for (std::size_t i = 1; i < toks.size(); ++i) {
      const auto& t = toks[i].text;
      if (t == "PARTICIPANT") {
        c.participant = true;
      } else if (t == "OFFSTAGE") {
        c.offstage = true;
      } else if (t == "AT") {
        c.zone = expect_id(n.line, toks, ++i, "zone");
      } else if (t.find('=') != std::string::npos) {
        c.facts.push_back(fact(n.line, Token{c.id + "." + t, toks[i].col, false}));
      } else {
        fail(n.line, toks[i], "unknown keyword '" + t + "'");
      }
    }
    take_comments(c.comments, n);
    c.loc = loc(n.line);
    doc_.characters.push_back(std::move(c));
  }

  void prop(const Node& n) {
    no_children(n);
    const auto toks = tokenize(n.line);
    PropDecl p;
    p.id = expect_id(n.line, toks, 0, "prop id");
    claim(entities_, p.id, n.line, "entity");
    for (std::size_t i = 1; i < toks.size(); ++i) {
      if (toks[i].text.find('=') == std::string::npos) fail(n.line, toks[i], "expected predicate=value");
      p.facts.push_back(fact(n.line, Token{p.id + "." + toks[i].text, toks[i].col, false}));
    }
    take_comments(p.comments, n);
    p.loc = loc(n.line);
    doc_.props.push_back(std::move(p));
  }

  void action(const Node& n) {
    no_children(n);
    const auto toks = tokenize(n.line);
    ActionDef a;
    a.id = expect_id(n.line, toks, 0, "action id");
    claim(actions_, a.id, n.line, "action");
    if (toks.size() < 4 || toks[1].text != "BY" || !toks[3].quoted)
      fail(n.line, "malformed action: expected <id> BY <performer> \"<description>\"");
    a.performer = expect_id(n.line, toks, 2, "performer");
    a.description = toks[3].text;
    std::vector<Fact>* target = nullptr;
    for (std::size_t i = 4; i < toks.size(); ++i) {
      if (toks[i].text == "PRE" && !toks[i].quoted) {
        target = &a.preconditions;
      } else if (toks[i].text == "EFFECT" && !toks[i].quoted) {
        target = &a.effects;
      } else {
        if (target == nullptr) fail(n.line, toks[i], "unknown keyword '" + toks[i].text + "'");
        target->push_back(fact(n.line, toks[i]));
      }
    }
    take_comments(a.comments, n);
    a.loc = loc(n.line);
    doc_.actions.push_back(std::move(a));
  }

  void variable(const Node& n) {
    const auto toks = tokenize(n.line);
    if (toks.front().text != "VAR") fail(n.line, toks.front(), "unknown keyword '" + toks.front().text + "'");
    VariableDecl v;
    v.variable.id = expect_id(n.line, toks, 1, "variable id");
    claim(variables_, v.variable.id, n.line, "variable");
    if (toks.size() != 4) fail(n.line, "malformed variable: expected VAR <id> <lo> <hi>");
    v.variable.lo = number(n.line, toks[2]);
    v.variable.hi = number(n.line, toks[3]);
    if (!(v.variable.lo < v.variable.hi)) fail(n.line, toks[2], "variable domain must have lo < hi");
    take_comments(v.comments, n);
    std::set<std::string> terms;
    for (const auto& child : n.children) {
      no_children(child);
      const auto tt = tokenize(child.line);
      if (tt.front().text != "TERM") fail(child.line, tt.front(), "unknown keyword '" + tt.front().text + "'");
      Term term;
      term.id = expect_id(child.line, tt, 1, "term id");
      if (term.id == kNotp) fail(child.line, tt[1], "NOTP is computed and cannot be declared as a term");
      claim(terms, term.id, child.line, "term");
      std::vector<Point> pts;
      for (std::size_t i = 2; i < tt.size(); ++i) {
        const auto colon = tt[i].text.find(':');
        if (colon == std::string::npos) fail(child.line, tt[i], "expected x:mu point");
        Token xs{tt[i].text.substr(0, colon), tt[i].col, false};
        Token ms{tt[i].text.substr(colon + 1), tt[i].col, false};
        const Point p{number(child.line, xs), number(child.line, ms)};
        if (p.x < v.variable.lo || p.x > v.variable.hi) fail(child.line, tt[i], "point outside variable domain");
        pts.push_back(p);
      }
      try {
        term.membership = PiecewiseLinear(std::move(pts));
      } catch (const std::invalid_argument& e) {
        fail(child.line, e.what());
      }
      take_comments(v.comments, child);
      v.variable.terms.push_back(std::move(term));
    }
    if (v.variable.terms.empty()) fail(n.line, "variable '" + v.variable.id + "' has no terms");
    v.loc = loc(n.line);
    doc_.variables.push_back(std::move(v));
  }

  void intent(const Node& n) {
    const auto toks = tokenize(n.line);
    if (toks.front().text != "INTENT") fail(n.line, toks.front(), "unknown keyword '" + toks.front().text + "'");
    IntentDecl d;
    d.intent.id = expect_id(n.line, toks, 1, "intent id");
    if (toks.size() != 2) fail(n.line, toks[2], "unexpected text after intent id");
    claim(intents_, d.intent.id, n.line, "intent");
    take_comments(d.comments, n);
    for (const auto& child : n.children) {
      no_children(child);
      const auto tt = tokenize(child.line);
      if (tt.front().text == "PHRASE") {
        auto text = rest_after_keyword(child.line, "PHRASE");
        if (normalize(text).empty()) fail(child.line, "phrase is empty after normalization");
        d.intent.phrases.push_back(std::move(text));
      } else if (tt.front().text == "SYN") {
        std::vector<std::string> group;
        for (const auto& w : normalize(rest_after_keyword(child.line, "SYN"))) group.push_back(w);
        if (group.size() < 2) fail(child.line, "SYN needs at least two words");
        d.intent.synonym_groups.push_back(std::move(group));
      } else {
        fail(child.line, tt.front(), "unknown keyword '" + tt.front().text + "'");
      }
      take_comments(d.comments, child);
    }
    if (d.intent.phrases.empty()) fail(n.line, "intent '" + d.intent.id + "' has no phrases");
    d.loc = loc(n.line);
    doc_.intents.push_back(std::move(d));
  }

  void agent_entry(const Node& n) {
    no_children(n);
    const auto toks = tokenize(n.line);
    const auto& kw = toks.front().text;
    if (kw == "GOAL") {
      GoalDecl g;
      g.id = expect_id(n.line, toks, 1, "goal id");
      claim(goals_, g.id, n.line, "goal");
      for (std::size_t i = 2; i < toks.size(); ++i) {
        const auto& t = toks[i].text;
        if (t == "FOR") {
          g.character = expect_id(n.line, toks, ++i, "character");
        } else if (t == "IMPORTANCE" && i + 1 < toks.size()) {
          g.importance = number(n.line, toks[++i]);
        } else if (t == "RELEVANCE" && i + 1 < toks.size()) {
          g.relevance = number(n.line, toks[++i]);
        } else {
          fail(n.line, toks[i], "unknown keyword '" + t + "'");
        }
      }
      if (g.character.empty()) fail(n.line, "GOAL needs FOR <character>");
      if (g.importance < 0 || g.importance > 1 || g.relevance < 0 || g.relevance > 1)
        fail(n.line, "importance and relevance must lie in [0,1]");
      take_comments(g.comments, n);
      g.loc = loc(n.line);
      doc_.goals.push_back(std::move(g));
    } else if (kw == "MODULE") {
      ModuleDecl m;
      m.id = expect_id(n.line, toks, 1, "module id");
      claim(modules_, m.id, n.line, "module");
      int mode = 0;  // 1: REQUIRES, 2: ACHIEVES
      for (std::size_t i = 2; i < toks.size(); ++i) {
        const auto& t = toks[i].text;
        if (t == "FOR") {
          m.character = expect_id(n.line, toks, ++i, "character");
        } else if (t == "DOES") {
          m.action_id = expect_id(n.line, toks, ++i, "action id");
        } else if (t == "REQUIRES") {
          mode = 1;
        } else if (t == "ACHIEVES") {
          mode = 2;
        } else if (mode == 1) {
          m.preconditions.push_back(t);
        } else if (mode == 2) {
          const auto colon = t.rfind(':');
          if (colon == std::string::npos) fail(n.line, toks[i], "expected proposition:degree");
          const double deg = number(n.line, Token{t.substr(colon + 1), toks[i].col, false});
          if (deg < 0 || deg > 1) fail(n.line, toks[i], "degree outside [0,1]");
          m.effects.push_back({t.substr(0, colon), deg});
        } else {
          fail(n.line, toks[i], "unknown keyword '" + t + "'");
        }
      }
      if (m.character.empty() || m.action_id.empty()) fail(n.line, "MODULE needs FOR <character> and DOES <action>");
      take_comments(m.comments, n);
      m.loc = loc(n.line);
      doc_.modules.push_back(std::move(m));
    } else {
      fail(n.line, toks.front(), "unknown keyword '" + kw + "'");
    }
  }

  ActionSet action_set(const Line& l, const std::vector<Token>& toks, std::size_t begin, std::size_t end) const {
    ActionSet set;
    bool want_id = true;
    for (std::size_t i = begin; i < end; ++i) {
      if (toks[i].text == "&") {
        if (want_id) fail(l, toks[i], "malformed action set");
        want_id = true;
        continue;
      }
      if (!want_id) fail(l, toks[i], "action ids in a set are joined with '&'");
      if (!is_id(toks[i].text)) fail(l, toks[i], "invalid action id '" + toks[i].text + "'");
      add_action(set, toks[i].text);
      want_id = false;
    }
    if (set.empty() || want_id) fail(l, "empty or unterminated action set");
    return set;
  }

  void matrix(const Node& n) {
    const auto colon = n.line.code.find(':');
    if (colon == std::string::npos) fail(n.line, "malformed matrix: expected MATRIX <id> ROWS <var> COLS <var>: <labels>");
    Line head = n.line;
    head.code = n.line.code.substr(0, colon);
    const auto toks = tokenize(head);
    MatrixDecl d;
    if (toks.size() != 6 || toks[2].text != "ROWS" || toks[4].text != "COLS")
      fail(n.line, "malformed matrix: expected MATRIX <id> ROWS <var> COLS <var>: <labels>");
    d.matrix.id = expect_id(n.line, toks, 1, "matrix id");
    claim(matrices_, d.matrix.id, n.line, "matrix");
    d.matrix.row_variable = expect_id(n.line, toks, 3, "row variable");
    d.matrix.col_variable = expect_id(n.line, toks, 5, "column variable");
    Line labels = n.line;
    labels.code = std::string(colon + 1, ' ') + n.line.code.substr(colon + 1);
    std::set<std::string> cols;
    for (const auto& t : tokenize(labels)) {
      if (!is_id(t.text)) fail(n.line, t, "invalid column label '" + t.text + "'");
      claim(cols, t.text, n.line, "column");
      d.matrix.col_labels.push_back(t.text);
    }
    take_comments(d.comments, n);
    std::set<std::string> rows;
    for (const auto& child : n.children) {
      no_children(child);
      const auto tt = tokenize(child.line);
      if (tt.front().text == "ROW") {
        const auto c = child.line.code.find(':');
        if (c == std::string::npos) fail(child.line, "malformed row: expected ROW <label>: <cells>");
        Line h = child.line;
        h.code = child.line.code.substr(0, c);
        const auto ht = tokenize(h);
        if (ht.size() != 2) fail(child.line, "malformed row: expected ROW <label>: <cells>");
        MatrixRow row;
        row.label = expect_id(child.line, ht, 1, "row label");
        claim(rows, row.label, child.line, "row");
        Line body = child.line;
        body.code = std::string(c + 1, ' ') + child.line.code.substr(c + 1);
        const auto bt = tokenize(body);
        std::size_t start = 0;
        for (std::size_t i = 0; i <= bt.size(); ++i) {
          if (i == bt.size() || bt[i].text == "|") {
            row.cells.push_back(action_set(child.line, bt, start, i));
            start = i + 1;
          }
        }
        d.matrix.rows.push_back(std::move(row));
      } else if (tt.front().text == "INCOMPAT") {
        IncompatibilityDecl decl;
        decl.first = expect_id(child.line, tt, 1, "action id");
        decl.second = expect_id(child.line, tt, 2, "action id");
        if (decl.first == decl.second) fail(child.line, tt[2], "an action cannot be incompatible with itself");
        std::size_t i = 3;
        while (i < tt.size()) {
          if (tt[i].text == "OVERRIDE") {
            std::size_t j = i + 1;
            while (j < tt.size() && tt[j].text != "WHEN") ++j;
            decl.override_actions = action_set(child.line, tt, i + 1, j);
            i = j;
          } else if (tt[i].text == "WHEN" && i + 1 < tt.size()) {
            decl.when = fact(child.line, tt[i + 1]);
            i += 2;
          } else {
            fail(child.line, tt[i], "unknown keyword '" + tt[i].text + "'");
          }
        }
        d.matrix.incompatibilities.push_back(std::move(decl));
      } else {
        fail(child.line, tt.front(), "unknown keyword '" + tt.front().text + "'");
      }
      take_comments(d.comments, child);
    }
    d.loc = loc(n.line);
    doc_.matrices.push_back(std::move(d));
  }

  // ---- scenes ----

  void scene(const Node& n) {
    const auto toks = tokenize(n.line);
    Scene sc;
    sc.id = expect_id(n.line, toks, 1, "scene id");
    if (toks.size() != 2) fail(n.line, toks[2], "unexpected text after scene id");
    claim(scenes_, sc.id, n.line, "scene");
    take_comments(sc.comments, n);
    sc.loc = loc(n.line);
    std::set<std::string> steps;
    for (const auto& child : n.children) {
      const auto ct = tokenize(child.line);
      if (ct.front().text == "AMBIENT") {
        no_children(child);
        if (!sc.steps.empty()) fail(child.line, "AMBIENT must precede the scene's steps");
        sc.ambient.push_back(rest_after_keyword(child.line, "AMBIENT"));
        take_comments(sc.comments, child);
      } else if (ct.front().text == "STEP") {
        SceneStep step;
        step.id = expect_id(child.line, ct, 1, "step id");
        if (ct.size() != 2) fail(child.line, ct[2], "unexpected text after step id");
        claim(steps, step.id, child.line, "step");
        take_comments(step.comments, child);
        step.loc = loc(child.line);
        step.items = step_items(child.children);
        sc.steps.push_back(std::move(step));
      } else {
        fail(child.line, ct.front(), "unknown keyword '" + ct.front().text + "'");
      }
    }
    if (sc.steps.empty()) fail(n.line, "scene '" + sc.id + "' has no steps");
    doc_.scenes.push_back(std::move(sc));
  }

  static bool is_rule_line(const std::vector<Token>& toks) {
    return toks.front().text == "IF" || toks.front().text == "NOTP";
  }

  std::vector<StepItem> step_items(const std::vector<Node>& nodes) {
    std::vector<StepItem> items;
    std::optional<StepItem> open;
    auto close = [&] {
      if (open) items.push_back(std::move(*open));
      open.reset();
    };
    for (const auto& n : nodes) {
      const auto toks = tokenize(n.line);
      if (is_rule_line(toks)) {
        if (!open) open = StepItem{RuleBlock{{}, std::nullopt, NotpMode::After, std::nullopt, 1, loc(n.line)}, {}, loc(n.line)};
        auto& block = std::get<RuleBlock>(open->node);
        add_rule(block, n, toks, 1);
        if (block.notp) close();
        continue;
      }
      close();
      no_children(n);
      StepItem item;
      item.loc = loc(n.line);
      take_comments(item.comments, n);
      const auto& kw = toks.front().text;
      if (kw == "DO") {
        if (toks.size() != 2) fail(n.line, "DO takes exactly one action");
        if (toks[1].text.starts_with('[')) fail(n.line, toks[1], "bracketed actions may only appear inside rule consequences");
        item.node = StatedAction{{expect_id(n.line, toks, 1, "action id"), false}};
      } else if (kw == "DECIDE") {
        if (toks.size() != 2) fail(n.line, "DECIDE takes exactly one matrix id");
        item.node = MatrixDirective{expect_id(n.line, toks, 1, "matrix id")};
      } else if (kw == "END") {
        if (toks.size() != 1) fail(n.line, toks[1], "unexpected text after END");
        item.node = EndMarker{};
      } else {
        fail(n.line, toks.front(), "unknown keyword '" + kw + "'");
      }
      items.push_back(std::move(item));
    }
    close();
    return items;
  }

  void add_rule(RuleBlock& block, const Node& n, const std::vector<Token>& toks, int depth) {
    if (block.notp) fail(n.line, "rule after NOTP in the same block");
    Rule rule;
    rule.loc = loc(n.line);
    take_comments(rule.comments, n);
    std::size_t then = 0;
    while (then < toks.size() && !(toks[then].text == "THEN" && !toks[then].quoted)) ++then;
    if (then == toks.size()) fail(n.line, "malformed rule: missing THEN");
    if (toks.front().text == "NOTP") {
      rule.condition = NotpCond{};
      if (then == 2 && toks[1].text == "IMMEDIATE") {
        block.notp_mode = NotpMode::Immediate;
      } else if (then == 3 && toks[1].text == "AFTER") {
        block.notp_mode = NotpMode::After;
        block.notp_after = integer(n.line, toks[2]);
        if (*block.notp_after < 1) fail(n.line, toks[2], "NOTP delay must be at least 1 tick");
      } else if (then != 1) {
        fail(n.line, toks[1], "malformed rule: expected NOTP [IMMEDIATE | AFTER <n>] THEN ...");
      }
    } else {
      rule.condition = condition(n.line, toks, 1, then);
    }
    rule.consequence = consequence(n.line, toks, then + 1);
    if (!n.children.empty()) rule.consequence.nested.push_back(nested_block(n, depth + 1));
    if (rule.is_notp())
      block.notp = std::move(rule);
    else
      block.rules.push_back(std::move(rule));
  }

  RuleBlock nested_block(const Node& parent, int depth) {
    RuleBlock block{{}, std::nullopt, NotpMode::After, std::nullopt, depth, loc(parent.children.front().line)};
    for (const auto& child : parent.children) {
      const auto toks = tokenize(child.line);
      if (!is_rule_line(toks)) fail(child.line, toks.front(), "only IF/NOTP rules may be nested under a rule");
      add_rule(block, child, toks, depth);
    }
    if (!block.notp) fail(parent.children.back().line, "unterminated block: nested rule block must end with NOTP");
    return block;
  }

  Condition condition(const Line& l, const std::vector<Token>& toks, std::size_t b, std::size_t e) const {
    const std::size_t n = e - b;
    if (n == 2 && toks[b].text == "SAYS") {
      const auto& t = toks[b + 1].text;
      if (t.size() < 2 || t.front() != '~' || !is_id(std::string_view(t).substr(1)))
        fail(l, toks[b + 1], "malformed rule: expected SAYS ~<intent>");
      return IntentCond{t.substr(1)};
    }
    if (n == 2 && toks[b].text == "TIMEOUT") return TimeoutCond{integer(l, toks[b + 1])};
    if (n == 3 && toks[b + 1].text == "IS") {
      return TermCond{expect_id(l, toks, b, "variable id"), expect_id(l, toks, b + 2, "term id")};
    }
    if (n == 1 && toks[b].text.find('=') != std::string::npos) return StateCond{fact(l, toks[b])};
    fail(l, n == 0 ? Token{"", l.indent + 1, false} : toks[b], "malformed rule: unrecognized condition");
  }

  Consequence consequence(const Line& l, const std::vector<Token>& toks, std::size_t i) const {
    Consequence c;
    bool control_seen = false;
    bool separator = false;
    for (; i < toks.size(); ++i) {
      const auto& t = toks[i].text;
      if (control_seen) fail(l, toks[i], "malformed rule: text after control directive");
      if (t == ";") {
        if (separator) fail(l, toks[i], "malformed rule: repeated ';'");
        separator = true;
        continue;
      }
      if (t == "NEXT" || t == "CONTINUE" || t == "STAY" || t == "WAIT" || t == "END" || t == "GOTO") {
        control_seen = true;
        if (t == "NEXT") c.control.kind = ControlKind::NextStep;
        if (t == "CONTINUE") c.control.kind = ControlKind::Continue;
        if (t == "STAY") c.control.kind = ControlKind::Stay;
        if (t == "WAIT") c.control.kind = ControlKind::Wait;
        if (t == "END") c.control.kind = ControlKind::End;
        if (t == "GOTO") {
          c.control.kind = ControlKind::Goto;
          if (i + 1 >= toks.size()) fail(l, toks[i], "malformed rule: GOTO needs a target step");
          const auto& target = toks[++i].text;
          const auto slash = target.find('/');
          const bool ok = slash == std::string::npos
                              ? is_id(target)
                              : is_id(target.substr(0, slash)) && is_id(target.substr(slash + 1));
          if (!ok) fail(l, toks[i], "malformed rule: invalid GOTO target '" + target + "'");
          c.control.target = target;
        }
        continue;
      }
      if (separator) fail(l, toks[i], "malformed rule: expected a control directive after ';'");
      ActionRef ref;
      std::string id = t;
      if (id.starts_with('[')) {
        if (!id.ends_with(']') || id.size() < 3) fail(l, toks[i], "malformed rule: unterminated '['");
        ref.bracketed = true;
        id = id.substr(1, id.size() - 2);
      }
      if (!is_id(id)) fail(l, toks[i], "malformed rule: invalid action id '" + t + "'");
      ref.action_id = id;
      c.actions.push_back(std::move(ref));
    }
    if (separator && !control_seen) fail(l, "malformed rule: ';' without a control directive");
    if (c.actions.empty() && !control_seen) fail(l, "malformed rule: THEN needs actions or a control directive");
    if (c.control.kind == ControlKind::Wait && !c.actions.empty())
      fail(l, "malformed rule: WAIT takes no actions (use STAY)");
    return c;
  }

  std::string_view source_;
  std::string file_;
  ScriptDoc doc_;
  std::set<std::string> entities_, actions_, variables_, intents_, matrices_, goals_, modules_, scenes_;
};

}  // namespace detail

/// Parses script text. Cross-references are checked by validate_script,
/// not here.
[[nodiscard]] inline ScriptDoc parse_script(std::string_view source, std::string file = "<input>") {
  return detail::Parser(source, std::move(file)).run();
}

}  // namespace zelig
