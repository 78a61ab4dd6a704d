#pragma once

// Angular loss (radians) and the multiply-accumulate cascade loss.

#include <span>
#include <vector>

#include "tcc/autodiff.hpp"
#include "tcc/color.hpp"

namespace tcc {

inline double angular_loss(const Illuminant& estimate, const Illuminant& truth) {
  return angle_between(estimate.rgb(), truth.rgb());
}

inline ad::Var angular_loss(const ad::Var& estimate, const Illuminant& truth) {
  if (estimate.size() != 3) throw DomainError("angular loss expects a 3-vector estimate");
  try {
    return ad::angle_to(estimate, truth.rgb());
  } catch (const ad::ShapeError& e) {
    throw DomainError(e.what());
  }
}

// Sum over l of the angle between the product of stages 1..l and the truth.
inline double mal_loss(std::span<const Illuminant> stages, const Illuminant& truth) {
  if (stages.empty()) throw DomainError("MAL loss of empty cascade");
  std::array<double, 3> prod{1.0, 1.0, 1.0};
  double total = 0.0;
  for (const auto& s : stages) {
    for (int j = 0; j < 3; ++j) prod[j] *= s[j];
    total += angle_between(prod, truth.rgb());
  }
  return total;
}

inline ad::Var mal_loss(std::span<const ad::Var> stages, const Illuminant& truth) {
  if (stages.empty()) throw DomainError("MAL loss of empty cascade");
  std::vector<ad::Var> terms;
  ad::Var prod;
  for (const auto& s : stages) {
    prod = prod.defined() ? ad::mul(prod, s) : s;
    terms.push_back(angular_loss(prod, truth));
  }
  return ad::sum(terms);
}

}  // namespace tcc
