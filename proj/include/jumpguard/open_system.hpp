#pragma once

// Open-system model definitions and Lindblad master-equation integration.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jumpguard/tensor.hpp"

namespace jumpguard {

/// A monitored decay channel: jump operator L acting on one slot at rate gamma.
struct DecayChannel {
  std::size_t slot = 0;
  Matrix jump_operator;  // local dimension
  double rate = 0.0;
};

/// Local jump operator and rate, before it is attached to a slot.
struct LocalChannel {
  Matrix jump_operator;
  double rate = 0.0;
};

class OpenSystemModel {
 public:
  OpenSystemModel(SpaceLayout layout, std::vector<DecayChannel> channels,
                  std::optional<Matrix> hamiltonian = std::nullopt);

  const SpaceLayout& layout() const { return layout_; }
  std::size_t dim() const { return layout_.total(); }
  const std::vector<DecayChannel>& channels() const { return channels_; }
  const std::optional<Matrix>& hamiltonian() const { return hamiltonian_; }

  /// Channel k's jump operator lifted to the full space (rate not included).
  const Matrix& full_jump(std::size_t k) const { return full_jumps_.at(k); }
  /// K = 1/2 sum_k gamma_k L_k^dagger L_k.
  const Matrix& effective_decay() const { return effective_decay_; }
  /// G = iH + K, so the no-jump flow is d psi/dt = -G psi.
  const Matrix& no_jump_generator() const { return generator_; }
  /// Largest total jump rate over all states (top eigenvalue of 2K), at least the largest channel rate.
  double max_rate() const { return max_rate_; }

 private:
  SpaceLayout layout_;
  std::vector<DecayChannel> channels_;
  std::optional<Matrix> hamiltonian_;
  std::vector<Matrix> full_jumps_;
  Matrix effective_decay_;
  Matrix generator_;
  double max_rate_ = 0.0;
};

enum class CascadeKind { degenerate, harmonic_oscillator, custom };

/// Three-level cascade |2> -> |1> -> |0>.
struct CascadeSpec {
  CascadeKind kind = CascadeKind::degenerate;
  double gamma21 = 1.0;
  double gamma10 = 1.0;
  /// Custom cascades only: whether an emitted excitation reveals its transition.
  bool distinguishable = false;

  static CascadeSpec degenerate(double gamma) { return {CascadeKind::degenerate, gamma, gamma, false}; }
  static CascadeSpec harmonic_oscillator(double gamma) {
    return {CascadeKind::harmonic_oscillator, 2.0 * gamma, gamma, false};
  }
  static CascadeSpec custom(double gamma21, double gamma10, bool distinguishable) {
    return {CascadeKind::custom, gamma21, gamma10, distinguishable};
  }
};

struct ThermalSpec {
  double nbar = 0.0;  // mean excitation number of the reservoir
};

/// Truncated annihilation operator sum_n sqrt(n) |n-1><n|.
Matrix lowering_operator(std::size_t dim);

std::vector<LocalChannel> build_qutrit_cascade(const CascadeSpec& spec);
/// Emission a at gamma (nbar + 1) and absorption a^dagger at gamma nbar.
std::vector<LocalChannel> thermal_channels(double gamma, const ThermalSpec& spec, std::size_t dim);

/// Attaches per-slot channel lists to a layout; slot_channels[s] applies to slot s.
OpenSystemModel build_local_model(const SpaceLayout& layout,
                                  const std::vector<std::vector<LocalChannel>>& slot_channels);

OpenSystemModel build_qubit_pair(double gamma);
OpenSystemModel build_qutrit_pair(const CascadeSpec& spec);
OpenSystemModel build_thermal_oscillator(double gamma, const ThermalSpec& spec, std::size_t dim);

/// d rho / dt = sum_k gamma_k (L rho L^dagger - 1/2 {L^dagger L, rho}) - i [H, rho].
DensityMatrix lindblad_rhs(const OpenSystemModel& model, const DensityMatrix& rho);

/// Fixed-step RK4 with max_rate * dt <= step_rate_bound; returns rho at each grid time.
std::vector<DensityMatrix> evolve_master(const OpenSystemModel& model, const DensityMatrix& rho0,
                                         std::span<const double> t_grid, double step_rate_bound = 1e-3);

}  // namespace jumpguard
