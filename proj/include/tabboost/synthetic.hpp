#pragma once

#include <cstddef>
#include <cstdint>

#include "tabboost/table.hpp"

namespace tabboost {

// Binary fixture with six numeric and four categorical columns over distinct
// ranges and vocabularies. The label comes from threshold interactions that a
// linear model over raw values cannot express, plus logistic noise.
struct SyntheticConfig {
  std::size_t samples = 2000;
  std::uint64_t seed = 7;
  double noise = 0.5;          // scale of the logistic noise on the label logit
  double missing_rate = 0.01;  // per numeric cell
};

Schema synthetic_schema();
Dataset make_synthetic(const SyntheticConfig& config = {});

}  // namespace tabboost
