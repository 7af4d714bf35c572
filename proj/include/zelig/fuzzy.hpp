#pragma once

// Linguistic variables, piecewise-linear membership and the
// possibility/necessity calculus used by rule blocks and decision matrices.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace zelig {

/// Truth degree in [0,1].
using Degree = double;

/// Reserved label of the "none of the previous" option.
inline constexpr std::string_view kNotp = "NOTP";

struct Point {
  double x = 0.0;
  Degree mu = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Membership function given by (x, mu) breakpoints with strictly increasing x.
/// Outside the breakpoint range the nearest endpoint's mu is used.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  explicit PiecewiseLinear(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw std::invalid_argument("membership needs at least two points");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (points_[i].mu < 0.0 || points_[i].mu > 1.0)
        throw std::invalid_argument("membership degree outside [0,1]");
      if (i > 0 && !(points_[i].x > points_[i - 1].x))
        throw std::invalid_argument("membership breakpoints must have strictly increasing x");
    }
  }

  [[nodiscard]] Degree operator()(double x) const {
    if (points_.empty()) return 0.0;
    if (x <= points_.front().x) return points_.front().mu;
    if (x >= points_.back().x) return points_.back().mu;
    auto hi = std::upper_bound(points_.begin(), points_.end(), x,
                               [](double v, const Point& p) { return v < p.x; });
    auto lo = std::prev(hi);
    const double w = (x - lo->x) / (hi->x - lo->x);
    return std::clamp(lo->mu + w * (hi->mu - lo->mu), 0.0, 1.0);
  }

  [[nodiscard]] Degree peak() const {
    Degree best = 0.0;
    for (const auto& p : points_) best = std::max(best, p.mu);
    return best;
  }

  /// Largest |d mu / dx| over all segments.
  [[nodiscard]] double max_slope() const {
    double s = 0.0;
    for (std::size_t i = 1; i < points_.size(); ++i)
      s = std::max(s, std::abs(points_[i].mu - points_[i - 1].mu) / (points_[i].x - points_[i - 1].x));
    return s;
  }

  [[nodiscard]] const std::vector<Point>& points() const { return points_; }

  friend bool operator==(const PiecewiseLinear&, const PiecewiseLinear&) = default;

 private:
  std::vector<Point> points_;
};

struct Term {
  std::string id;
  PiecewiseLinear membership;
  friend bool operator==(const Term&, const Term&) = default;
};

struct LinguisticVariable {
  std::string id;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<Term> terms;

  [[nodiscard]] const Term* find(std::string_view term_id) const {
    for (const auto& t : terms)
      if (t.id == term_id) return &t;
    return nullptr;
  }
  friend bool operator==(const LinguisticVariable&, const LinguisticVariable&) = default;
};

struct TermDegree {
  std::string term;
  Degree degree = 0.0;
  friend bool operator==(const TermDegree&, const TermDegree&) = default;
};

/// Per-term truth degrees of one variable, in declaration order, plus NOTP.
struct DegreeVector {
  std::string variable_id;
  std::vector<TermDegree> degrees;
  Degree notp = 1.0;

  /// Degree of an authored term or of "NOTP"; unknown labels read as 0.
  [[nodiscard]] Degree at(std::string_view label) const {
    if (label == kNotp) return notp;
    for (const auto& d : degrees)
      if (d.term == label) return d.degree;
    return 0.0;
  }
  [[nodiscard]] Degree max_term() const {
    Degree m = 0.0;
    for (const auto& d : degrees) m = std::max(m, d.degree);
    return m;
  }
  friend bool operator==(const DegreeVector&, const DegreeVector&) = default;
};

struct PossibilityPair {
  Degree nec = 0.0;
  Degree pos = 1.0;
};

/// Rounding slack for threshold tests: interpolated degrees such as
/// 1 - 0.05/0.1 land a few ulps below their exact value.
inline constexpr Degree kDegreeTolerance = 1e-9;

[[nodiscard]] inline bool reaches(Degree d, Degree theta) { return d >= theta - kDegreeTolerance; }

[[nodiscard]] inline Degree membership_degree(const Term& term, double x) { return term.membership(x); }

[[nodiscard]] inline Degree combine_min(Degree a, Degree b) { return std::min(a, b); }
[[nodiscard]] inline Degree combine_max(Degree a, Degree b) { return std::max(a, b); }

/// Complement of the best sibling: 1 - max(degrees), 1 for no siblings.
[[nodiscard]] inline Degree notp_degree(std::span<const Degree> degrees) {
  Degree m = 0.0;
  for (Degree d : degrees) m = combine_max(m, d);
  return 1.0 - m;
}

/// nec(a) = 1 - pos(not a)
[[nodiscard]] inline Degree necessity_from(Degree pos_of_negation) { return 1.0 - pos_of_negation; }

/// Diagnostic for an externally supplied estimate p: nec <= p <= pos.
[[nodiscard]] inline bool check_consistency_bounds(Degree nec, Degree p, Degree pos) {
  return nec <= p && p <= pos;
}

[[nodiscard]] inline DegreeVector make_degree_vector(std::string variable_id, std::vector<TermDegree> degrees) {
  DegreeVector v{std::move(variable_id), std::move(degrees), 1.0};
  std::vector<Degree> raw;
  raw.reserve(v.degrees.size());
  for (const auto& d : v.degrees) raw.push_back(d.degree);
  v.notp = notp_degree(raw);
  return v;
}

[[nodiscard]] inline DegreeVector fuzzify(const LinguisticVariable& variable, double x) {
  std::vector<TermDegree> out;
  out.reserve(variable.terms.size());
  for (const auto& t : variable.terms) out.push_back({t.id, membership_degree(t, x)});
  return make_degree_vector(variable.id, std::move(out));
}

/// Possibility/necessity of one option of a degree vector, the alternatives
/// being every other term and NOTP: nec(a) = 1 - max(alternatives).
[[nodiscard]] inline PossibilityPair measure_of(const DegreeVector& v, std::string_view label) {
  Degree alternatives = label == kNotp ? 0.0 : v.notp;
  for (const auto& d : v.degrees)
    if (d.term != label) alternatives = combine_max(alternatives, d.degree);
  const Degree pos = v.at(label);
  return {std::min(necessity_from(alternatives), pos), pos};
}

}  // namespace zelig
