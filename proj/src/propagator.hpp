#pragma once

#include "jumpguard/open_system.hpp"
#include "jumpguard/tensor.hpp"

namespace jumpguard::detail {

/// exp(-G t) for the model's no-jump generator, for arbitrary t.
class NoJumpPropagator {
 public:
  explicit NoJumpPropagator(const OpenSystemModel& model);

  StateVector apply(const StateVector& psi, double t) const;
  Matrix matrix(double t) const;

 private:
  enum class Kind { diagonal, hermitian, general };
  Kind kind_;
  std::vector<Complex> diagonal_;
  EigenSystem eigen_;
  Matrix generator_;
};

}  // namespace jumpguard::detail
