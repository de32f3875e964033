#include "jumpguard/trajectories.hpp"

#include <algorithm>
#include <cmath>

#include "propagator.hpp"

namespace jumpguard {

namespace detail {

NoJumpPropagator::NoJumpPropagator(const OpenSystemModel& model) : generator_(model.no_jump_generator()) {
  if (generator_.is_diagonal()) {
    kind_ = Kind::diagonal;
    for (std::size_t i = 0; i < generator_.rows(); ++i) diagonal_.push_back(generator_(i, i));
  } else if (!model.hamiltonian()) {
    kind_ = Kind::hermitian;
    eigen_ = hermitian_eigensystem(generator_);
  } else {
    kind_ = Kind::general;
  }
}

StateVector NoJumpPropagator::apply(const StateVector& psi, double t) const {
  switch (kind_) {
    case Kind::diagonal: {
      StateVector out = psi;
      for (std::size_t i = 0; i < out.dim(); ++i) out[i] *= std::exp(-diagonal_[i] * t);
      return out;
    }
    case Kind::hermitian: {
      const Matrix& v = eigen_.vectors;
      const std::size_t n = psi.dim();
      StateVector coeffs(n);
      for (std::size_t j = 0; j < n; ++j) {
        Complex s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += std::conj(v(i, j)) * psi[i];
        coeffs[j] = s * std::exp(-eigen_.values[j] * t);
      }
      return v * coeffs;
    }
    case Kind::general:
      return matrix(t) * psi;
  }
  return psi;
}

Matrix NoJumpPropagator::matrix(double t) const {
  switch (kind_) {
    case Kind::diagonal: {
      Matrix out(diagonal_.size(), diagonal_.size());
      for (std::size_t i = 0; i < diagonal_.size(); ++i) out(i, i) = std::exp(-diagonal_[i] * t);
      return out;
    }
    case Kind::hermitian: {
      const std::size_t n = eigen_.values.size();
      Matrix scaled = eigen_.vectors;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) scaled(r, c) *= std::exp(-eigen_.values[c] * t);
      return scaled * eigen_.vectors.adjoint();
    }
    case Kind::general:
      return expm(-t * generator_);
  }
  return generator_;
}

}  // namespace detail

FeedbackPolicy FeedbackPolicy::none(double efficiency) {
  FeedbackPolicy p;
  p.efficiency = efficiency;
  return p;
}

FeedbackPolicy FeedbackPolicy::uniform(const Matrix& unitary, std::size_t slots, double delay, double efficiency) {
  FeedbackPolicy p;
  p.enabled = true;
  p.corrections.assign(slots, unitary);
  p.delay = delay;
  p.efficiency = efficiency;
  return p;
}

void FeedbackPolicy::validate(const SpaceLayout& layout) const {
  if (!(efficiency >= 0.0 && efficiency <= 1.0))
    throw std::invalid_argument("feedback policy: detection efficiency must lie in [0, 1]");
  if (!(delay >= 0.0)) throw std::invalid_argument("feedback policy: delay must be non-negative");
  if (!enabled) return;
  if (corrections.size() > layout.slots()) throw DimensionError("feedback policy: more corrections than slots");
  for (std::size_t slot = 0; slot < corrections.size(); ++slot) {
    const Matrix& u = corrections[slot];
    if (u.empty()) continue;
    if (!u.is_square() || u.rows() != layout.dim(slot))
      throw DimensionError("feedback policy: correction does not match slot dimension");
    if ((u.adjoint() * u).max_abs_diff(Matrix::identity(u.rows())) > 1e-10)
      throw std::invalid_argument("feedback policy: correction is not unitary");
  }
}

Matrix cyclic_feedback_unitary() {
  return Matrix::basis_outer(3, 2, 1) + Matrix::basis_outer(3, 1, 0) + Matrix::basis_outer(3, 0, 2);
}

Matrix no_jump_operator(const OpenSystemModel& model, double dt, NoJumpForm form) {
  if (!(dt > 0.0)) throw std::invalid_argument("no_jump_operator: dt must be positive");
  if (form == NoJumpForm::first_order) return Matrix::identity(model.dim()) - dt * model.no_jump_generator();
  return detail::NoJumpPropagator(model).matrix(dt);
}

Matrix jump_operator(const OpenSystemModel& model, std::size_t channel, double dt) {
  if (channel >= model.channels().size()) throw DimensionError("jump_operator: channel out of range");
  return std::sqrt(model.channels()[channel].rate * dt) * model.full_jump(channel);
}

StepResult no_jump_step(const OpenSystemModel& model, const StateVector& psi, double dt, NoJumpForm form) {
  if (psi.dim() != model.dim()) throw DimensionError("no_jump_step: state does not match model dimension");
  StepResult r;
  r.state = form == NoJumpForm::exponential ? detail::NoJumpPropagator(model).apply(psi, dt)
                                            : no_jump_operator(model, dt, form) * psi;
  r.probability = r.state.norm_squared();
  return r;
}

StepResult jump_step(const OpenSystemModel& model, const StateVector& psi, std::size_t channel, double dt) {
  if (psi.dim() != model.dim()) throw DimensionError("jump_step: state does not match model dimension");
  StepResult r;
  r.state = jump_operator(model, channel, dt) * psi;
  r.probability = r.state.norm_squared();
  return r;
}

double kraus_completeness_deviation(const OpenSystemModel& model, double dt, NoJumpForm form) {
  const Matrix p0 = no_jump_operator(model, dt, form);
  Matrix sum = p0.adjoint() * p0;
  for (std::size_t k = 0; k < model.channels().size(); ++k) {
    const Matrix p1 = jump_operator(model, k, dt);
    sum += p1.adjoint() * p1;
  }
  Matrix dev = sum - Matrix::identity(model.dim());
  dev = 0.5 * (dev + dev.adjoint());
  double worst = 0.0;
  for (double ev : hermitian_eigenvalues(dev)) worst = std::max(worst, std::abs(ev));
  return worst;
}

StateVector apply_feedback(const FeedbackPolicy& policy, const StateVector& psi, std::size_t slot,
                           const SpaceLayout& layout) {
  if (!policy.enabled) throw std::invalid_argument("apply_feedback: feedback is disabled");
  policy.validate(layout);
  if (!policy.corrects(slot)) return psi;
  return embed(policy.corrections[slot], slot, layout) * psi;
}

DensityMatrix ensemble_average(std::span<const TrajectoryRecord> records) {
  if (records.empty()) throw std::invalid_argument("ensemble_average: no records");
  DensityMatrix out;
  for (const auto& rec : records) {
    DensityMatrix rho = std::holds_alternative<StateVector>(rec.state)
                            ? std::get<StateVector>(rec.state).projector()
                            : std::get<DensityMatrix>(rec.state);
    rho *= Complex{rec.probability, 0.0};
    if (out.empty())
      out = std::move(rho);
    else
      out += rho;
  }
  return out;
}

}  // namespace jumpguard
