#pragma once

// Two-variable fuzzy decision matrices: min-scored cells, threshold firing,
// and incompatibility detection with director-supplied overrides.

#include <algorithm>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "zelig/fuzzy.hpp"
#include "zelig/world.hpp"

namespace zelig {

/// Action ids in first-seen order, without duplicates.
using ActionSet = std::vector<std::string>;

inline void add_action(ActionSet& set, const std::string& id) {
  if (std::find(set.begin(), set.end(), id) == set.end()) set.push_back(id);
}

[[nodiscard]] inline bool contains(const ActionSet& set, const std::string& id) {
  return std::find(set.begin(), set.end(), id) != set.end();
}

struct MatrixRow {
  std::string label;
  std::vector<ActionSet> cells;
  friend bool operator==(const MatrixRow&, const MatrixRow&) = default;
};

/// Incompatible pair. The override, when given, replaces `second`.
struct IncompatibilityDecl {
  std::string first;
  std::string second;
  std::optional<Fact> when;
  ActionSet override_actions;
  friend bool operator==(const IncompatibilityDecl&, const IncompatibilityDecl&) = default;
};

struct DecisionMatrix {
  std::string id;
  std::string row_variable;
  std::string col_variable;
  std::vector<std::string> col_labels;
  std::vector<MatrixRow> rows;
  std::vector<IncompatibilityDecl> incompatibilities;

  [[nodiscard]] const ActionSet* cell(std::string_view row, std::string_view col) const {
    auto c = std::find(col_labels.begin(), col_labels.end(), col);
    if (c == col_labels.end()) return nullptr;
    const auto ci = static_cast<std::size_t>(c - col_labels.begin());
    for (const auto& r : rows)
      if (r.label == row) return ci < r.cells.size() ? &r.cells[ci] : nullptr;
    return nullptr;
  }
  [[nodiscard]] ActionSet* cell(std::string_view row, std::string_view col) {
    return const_cast<ActionSet*>(std::as_const(*this).cell(row, col));
  }
  friend bool operator==(const DecisionMatrix&, const DecisionMatrix&) = default;
};

class MatrixError : public std::runtime_error {
 public:
  enum class Code { VariableMismatch, IncompleteMatrix };
  MatrixError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  [[nodiscard]] Code code() const { return code_; }

 private:
  Code code_;
};

struct ScoredCell {
  std::string row_term;
  std::string col_term;
  Degree score = 0.0;
  ActionSet actions;
};

[[nodiscard]] inline std::vector<std::string> labels_with_notp(const DegreeVector& v) {
  std::vector<std::string> out;
  for (const auto& d : v.degrees) out.push_back(d.term);
  out.emplace_back(kNotp);
  return out;
}

/// Scores every cell as min(row degree, col degree), row-major in the
/// vectors' term order with NOTP last on both axes.
[[nodiscard]] inline std::vector<ScoredCell> evaluate_matrix(const DecisionMatrix& matrix, const DegreeVector& row,
                                                             const DegreeVector& col) {
  if (row.variable_id != matrix.row_variable)
    throw MatrixError(MatrixError::Code::VariableMismatch,
                      "matrix " + matrix.id + " expects rows from " + matrix.row_variable + ", got " + row.variable_id);
  if (col.variable_id != matrix.col_variable)
    throw MatrixError(MatrixError::Code::VariableMismatch,
                      "matrix " + matrix.id + " expects columns from " + matrix.col_variable + ", got " +
                          col.variable_id);
  std::vector<ScoredCell> out;
  for (const auto& r : labels_with_notp(row)) {
    for (const auto& c : labels_with_notp(col)) {
      const ActionSet* actions = matrix.cell(r, c);
      if (actions == nullptr)
        throw MatrixError(MatrixError::Code::IncompleteMatrix,
                          "matrix " + matrix.id + " has no cell (" + r + ", " + c + ")");
      out.push_back({r, c, combine_min(row.at(r), col.at(c)), *actions});
    }
  }
  return out;
}

/// Union of the actions of every cell scoring at least `theta`.
[[nodiscard]] inline ActionSet select_actions(const std::vector<ScoredCell>& cells, Degree theta) {
  ActionSet out;
  for (const auto& c : cells)
    if (reaches(c.score, theta))
      for (const auto& a : c.actions) add_action(out, a);
  return out;
}

struct IncompatibilityFinding {
  std::string row;
  std::string col;
  // Set when the pair is split across two cells that may fire together.
  std::optional<std::pair<std::string, std::string>> other_cell;
  std::string first;
  std::string second;
  ActionSet override_actions;
};

/// Flags every cell holding both members of a declared pair. Pairs split
/// across two cells are flagged only when the declaration has no override,
/// since a declared override is applied whenever such cells co-fire.
[[nodiscard]] inline std::vector<IncompatibilityFinding> detect_incompatibilities(
    const DecisionMatrix& matrix, const std::vector<IncompatibilityDecl>& decls) {
  struct CellRef {
    const std::string* row;
    const std::string* col;
    const ActionSet* actions;
  };
  std::vector<CellRef> cells;
  for (const auto& r : matrix.rows)
    for (std::size_t i = 0; i < r.cells.size() && i < matrix.col_labels.size(); ++i)
      cells.push_back({&r.label, &matrix.col_labels[i], &r.cells[i]});

  std::vector<IncompatibilityFinding> out;
  for (const auto& d : decls) {
    for (const auto& c : cells)
      if (contains(*c.actions, d.first) && contains(*c.actions, d.second))
        out.push_back({*c.row, *c.col, std::nullopt, d.first, d.second, d.override_actions});
    if (!d.override_actions.empty()) continue;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      for (std::size_t j = 0; j < cells.size(); ++j) {
        if (i == j) continue;
        const auto& a = cells[i];
        const auto& b = cells[j];
        if (contains(*a.actions, d.first) && !contains(*a.actions, d.second) && contains(*b.actions, d.second) &&
            !contains(*b.actions, d.first))
          out.push_back({*a.row, *a.col, std::make_pair(*b.row, *b.col), d.first, d.second, {}});
      }
    }
  }
  return out;
}

/// Rewrites the flagged single cells, replacing `second` with the override.
inline void apply_overrides(DecisionMatrix& matrix, const std::vector<IncompatibilityFinding>& findings) {
  for (const auto& f : findings) {
    if (f.other_cell || f.override_actions.empty()) continue;
    ActionSet* cell = matrix.cell(f.row, f.col);
    if (cell == nullptr) continue;
    ActionSet rewritten;
    for (const auto& a : *cell) {
      if (a == f.second) {
        for (const auto& o : f.override_actions) add_action(rewritten, o);
      } else {
        add_action(rewritten, a);
      }
    }
    *cell = std::move(rewritten);
  }
}

/// Runtime resolution of a fired action set: every declared pair present
/// whose `when` condition holds has its second member replaced by the override.
[[nodiscard]] inline ActionSet resolve_incompatibilities(const ActionSet& selected,
                                                         const std::vector<IncompatibilityDecl>& decls,
                                                         const std::function<bool(const Fact&)>& holds) {
  ActionSet out = selected;
  for (const auto& d : decls) {
    if (d.override_actions.empty() || !contains(out, d.first) || !contains(out, d.second)) continue;
    if (d.when && !holds(*d.when)) continue;
    ActionSet next;
    for (const auto& a : out) {
      if (a == d.second) {
        for (const auto& o : d.override_actions) add_action(next, o);
      } else {
        add_action(next, a);
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace zelig
