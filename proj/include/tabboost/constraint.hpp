#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace tabboost {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// lower < x < upper, with each side optionally closed. Infinite bounds are
// always open.
struct NumericRange {
  double lower = -kInf;
  bool lower_open = true;
  double upper = kInf;
  bool upper_open = true;

  bool empty() const;
  bool contains(double x) const;
  bool operator==(const NumericRange&) const = default;
};

struct CatEquals {
  std::size_t category = 0;
  bool operator==(const CatEquals&) const = default;
};

// Sorted, duplicate-free excluded categories.
struct CatNotIn {
  std::vector<std::size_t> categories;
  bool operator==(const CatNotIn&) const = default;
};

struct IsMissing {
  bool operator==(const IsMissing&) const = default;
};

struct Constraint {
  std::size_t feature = 0;
  std::variant<NumericRange, CatEquals, CatNotIn, IsMissing> body;

  // Whether a cell value (NaN = missing) lies in the constrained set. Only
  // IsMissing admits a missing cell.
  bool admits(double cell) const;
  bool operator==(const Constraint&) const = default;
};

Constraint make_range(std::size_t feature, double lower, bool lower_open, double upper,
                      bool upper_open);
Constraint make_equals(std::size_t feature, std::size_t category);
Constraint make_not_in(std::size_t feature, std::vector<std::size_t> categories);
Constraint make_missing(std::size_t feature);

// Intersection of two constraints on the same feature. Throws MergeConflict
// when the intersection is empty or the kinds cannot meet (for instance a
// missing assertion against a range).
Constraint merge_constraints(const Constraint& a, const Constraint& b);

// Conjunction of constraints with at most one entry per feature, sorted by
// feature index.
struct DecisionPath {
  std::vector<Constraint> constraints;
  std::size_t source_tree = 0;

  bool satisfied_by(std::span<const double> row) const;
  const Constraint* find(std::size_t feature) const;
};

// Merges `c` into a per-feature sorted constraint list, tightening any
// existing entry on the same feature.
void add_constraint(std::vector<Constraint>& constraints, const Constraint& c);

std::string describe(const Constraint& c);

}  // namespace tabboost
