#include "tabboost/constraint.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

#include "tabboost/error.hpp"
#include "tabboost/util.hpp"

namespace tabboost {

bool NumericRange::empty() const {
  if (lower > upper) return true;
  if (lower == upper) return lower_open || upper_open;
  return false;
}

bool NumericRange::contains(double x) const {
  if (std::isnan(x)) return false;
  const bool above = lower_open ? x > lower : x >= lower;
  const bool below = upper_open ? x < upper : x <= upper;
  return above && below;
}

bool Constraint::admits(double cell) const {
  const bool missing = std::isnan(cell);
  return std::visit(
      [&](const auto& b) -> bool {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, IsMissing>) {
          return missing;
        } else if (missing) {
          return false;
        } else if constexpr (std::is_same_v<T, NumericRange>) {
          return b.contains(cell);
        } else if constexpr (std::is_same_v<T, CatEquals>) {
          return cell == static_cast<double>(b.category);
        } else {
          return std::none_of(b.categories.begin(), b.categories.end(),
                              [&](std::size_t c) { return cell == static_cast<double>(c); });
        }
      },
      body);
}

Constraint make_range(std::size_t feature, double lower, bool lower_open, double upper,
                      bool upper_open) {
  NumericRange r{lower, lower_open || std::isinf(lower), upper, upper_open || std::isinf(upper)};
  if (r.empty()) throw MergeConflict("empty numeric range on feature " + std::to_string(feature));
  return Constraint{feature, r};
}

Constraint make_equals(std::size_t feature, std::size_t category) {
  return Constraint{feature, CatEquals{category}};
}

Constraint make_not_in(std::size_t feature, std::vector<std::size_t> categories) {
  std::sort(categories.begin(), categories.end());
  categories.erase(std::unique(categories.begin(), categories.end()), categories.end());
  if (categories.empty()) throw MergeConflict("empty exclusion set on feature " + std::to_string(feature));
  return Constraint{feature, CatNotIn{std::move(categories)}};
}

Constraint make_missing(std::size_t feature) { return Constraint{feature, IsMissing{}}; }

namespace {

NumericRange intersect(const NumericRange& a, const NumericRange& b) {
  NumericRange r;
  if (a.lower > b.lower) {
    r.lower = a.lower;
    r.lower_open = a.lower_open;
  } else if (b.lower > a.lower) {
    r.lower = b.lower;
    r.lower_open = b.lower_open;
  } else {
    r.lower = a.lower;
    r.lower_open = a.lower_open || b.lower_open;
  }
  if (a.upper < b.upper) {
    r.upper = a.upper;
    r.upper_open = a.upper_open;
  } else if (b.upper < a.upper) {
    r.upper = b.upper;
    r.upper_open = b.upper_open;
  } else {
    r.upper = a.upper;
    r.upper_open = a.upper_open || b.upper_open;
  }
  return r;
}

bool excludes(const CatNotIn& n, std::size_t category) {
  return std::binary_search(n.categories.begin(), n.categories.end(), category);
}

}  // namespace

Constraint merge_constraints(const Constraint& a, const Constraint& b) {
  if (a.feature != b.feature) {
    throw MergeConflict("constraints on different features (" + std::to_string(a.feature) + ", " +
                        std::to_string(b.feature) + ")");
  }
  const auto fail = [&]() -> Constraint {
    throw MergeConflict(describe(a) + " and " + describe(b) + " have no common value");
  };
  Constraint out{a.feature, {}};
  if (const auto* ra = std::get_if<NumericRange>(&a.body)) {
    const auto* rb = std::get_if<NumericRange>(&b.body);
    if (!rb) return fail();
    out.body = intersect(*ra, *rb);
    if (std::get<NumericRange>(out.body).empty()) return fail();
    return out;
  }
  if (std::holds_alternative<IsMissing>(a.body)) {
    if (!std::holds_alternative<IsMissing>(b.body)) return fail();
    return a;
  }
  if (const auto* ea = std::get_if<CatEquals>(&a.body)) {
    if (const auto* eb = std::get_if<CatEquals>(&b.body)) {
      if (ea->category != eb->category) return fail();
      return a;
    }
    if (const auto* nb = std::get_if<CatNotIn>(&b.body)) {
      if (excludes(*nb, ea->category)) return fail();
      return a;
    }
    return fail();
  }
  const auto& na = std::get<CatNotIn>(a.body);
  if (const auto* eb = std::get_if<CatEquals>(&b.body)) {
    if (excludes(na, eb->category)) return fail();
    return b;
  }
  if (const auto* nb = std::get_if<CatNotIn>(&b.body)) {
    CatNotIn merged;
    std::set_union(na.categories.begin(), na.categories.end(), nb->categories.begin(),
                   nb->categories.end(), std::back_inserter(merged.categories));
    out.body = std::move(merged);
    return out;
  }
  return fail();
}

void add_constraint(std::vector<Constraint>& constraints, const Constraint& c) {
  auto it = std::lower_bound(constraints.begin(), constraints.end(), c.feature,
                             [](const Constraint& x, std::size_t f) { return x.feature < f; });
  if (it != constraints.end() && it->feature == c.feature) {
    *it = merge_constraints(*it, c);
  } else {
    constraints.insert(it, c);
  }
}

bool DecisionPath::satisfied_by(std::span<const double> row) const {
  return std::all_of(constraints.begin(), constraints.end(), [&](const Constraint& c) {
    return c.feature < row.size() && c.admits(row[c.feature]);
  });
}

const Constraint* DecisionPath::find(std::size_t feature) const {
  for (const auto& c : constraints) {
    if (c.feature == feature) return &c;
  }
  return nullptr;
}

std::string describe(const Constraint& c) {
  const std::string f = "f" + std::to_string(c.feature);
  return std::visit(
      [&](const auto& b) -> std::string {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, NumericRange>) {
          return f + " in " + (b.lower_open ? "(" : "[") + format_number(b.lower) + ", " +
                 format_number(b.upper) + (b.upper_open ? ")" : "]");
        } else if constexpr (std::is_same_v<T, CatEquals>) {
          return f + " = #" + std::to_string(b.category);
        } else if constexpr (std::is_same_v<T, CatNotIn>) {
          std::string s = f + " not in {";
          for (std::size_t i = 0; i < b.categories.size(); ++i) {
            if (i) s += ",";
            s += "#" + std::to_string(b.categories[i]);
          }
          return s + "}";
        } else {
          return f + " missing";
        }
      },
      c.body);
}

}  // namespace tabboost
