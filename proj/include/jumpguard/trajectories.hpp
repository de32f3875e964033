#pragma once

// Quantum-jump unraveling of an OpenSystemModel: exact enumeration of the
// trajectory tree and Monte Carlo sampling, with local feedback, feedback
// delay and finite detection efficiency.

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "jumpguard/open_system.hpp"
#include "jumpguard/tensor.hpp"

namespace jumpguard {

struct JumpEvent {
  double time = 0.0;
  std::size_t slot = 0;
  std::size_t channel = 0;  // index into model.channels()

  friend bool operator==(const JumpEvent&, const JumpEvent&) = default;
};

/// Normalized pure state, or a density matrix when detection is inefficient.
using ConditionalState = std::variant<StateVector, DensityMatrix>;

struct TrajectoryRecord {
  std::vector<JumpEvent> events;
  ConditionalState state;
  /// Probability (exact mode) or 1/N weight (sampled mode).
  double probability = 0.0;
};

/// Local correction applied after each recorded jump.
struct FeedbackPolicy {
  bool enabled = false;
  /// One entry per slot; an empty matrix means no correction on that slot.
  std::vector<Matrix> corrections;
  double delay = 0.0;       // tau
  double efficiency = 1.0;  // eta

  static FeedbackPolicy none(double efficiency = 1.0);
  /// Same correction on every slot.
  static FeedbackPolicy uniform(const Matrix& unitary, std::size_t slots, double delay = 0.0,
                                double efficiency = 1.0);

  /// Throws on non-unitary corrections, bad slot dimensions, tau < 0 or eta outside [0, 1].
  void validate(const SpaceLayout& layout) const;
  bool corrects(std::size_t slot) const {
    return enabled && slot < corrections.size() && !corrections[slot].empty();
  }
};

/// |1> -> |2>, |0> -> |1>, completed to a unitary with |2> -> |0>.
Matrix cyclic_feedback_unitary();

struct UnravelingConfig {
  double dt = 1e-3;
  double t_max = 1.0;
  // Exact mode.
  std::size_t max_jumps = 4;
  double truncation_bound = 1e-4;
  /// Gauss-Legendre points per jump-time integral; 0 picks from the rate scale.
  std::size_t quadrature_order = 0;
  // Sampled mode.
  std::size_t n_samples = 1000;
  std::uint64_t seed = 0;
};

class TruncationError : public std::runtime_error {
 public:
  TruncationError(const std::string& what, double mass) : std::runtime_error(what), mass_(mass) {}
  double mass() const { return mass_; }

 private:
  double mass_;
};

enum class NoJumpForm {
  exponential,  // exp(-G dt)
  first_order,  // 1 - G dt
};

struct StepResult {
  StateVector state;  // unnormalized
  double probability = 0.0;
};

Matrix no_jump_operator(const OpenSystemModel& model, double dt, NoJumpForm form = NoJumpForm::exponential);
/// sqrt(gamma_k dt) L_k on the full space.
Matrix jump_operator(const OpenSystemModel& model, std::size_t channel, double dt);

StepResult no_jump_step(const OpenSystemModel& model, const StateVector& psi, double dt,
                        NoJumpForm form = NoJumpForm::exponential);
StepResult jump_step(const OpenSystemModel& model, const StateVector& psi, std::size_t channel, double dt);

/// Operator-norm deviation of the one-step Kraus set from completeness.
double kraus_completeness_deviation(const OpenSystemModel& model, double dt, NoJumpForm form);

StateVector apply_feedback(const FeedbackPolicy& policy, const StateVector& psi, std::size_t slot,
                           const SpaceLayout& layout);

struct EnumerationResult {
  std::vector<TrajectoryRecord> records;
  double truncation_mass = 0.0;
};

/// Depth-limited tree over jump records at config.t_max. Jump times are
/// integrated with nested Gauss-Legendre quadrature over the exact no-jump
/// propagator. A jump whose correction restores the pre-jump conditional
/// state leaves the branch unchanged and is folded into it rather than
/// opening a new branch. Requires eta = 1 and tau = 0.
EnumerationResult enumerate_trajectories(const OpenSystemModel& model, const StateVector& psi0,
                                         const UnravelingConfig& config, const FeedbackPolicy& policy);

/// Monte Carlo records at config.t_max, each with weight 1/N. Records hold
/// density matrices when policy.efficiency < 1.
std::vector<TrajectoryRecord> sample_trajectories(const OpenSystemModel& model, const StateVector& psi0,
                                                  const UnravelingConfig& config, const FeedbackPolicy& policy);

using StateFunctional = std::function<double(const ConditionalState&)>;

struct SampledSeries {
  std::vector<double> times;
  /// mean[f][i] is the sample mean of functional f at times[i].
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> std_error;
  /// Fraction of trajectories with no recorded jump up to times[i].
  std::vector<double> no_event_fraction;
  std::size_t samples = 0;
};

/// Sampled ensemble averages of functionals on a time grid. The grid must be
/// ascending and non-negative; the step is refined so grid points fall on step
/// boundaries. Trajectory i depends only on (seed, i).
SampledSeries sample_series(const OpenSystemModel& model, const StateVector& psi0, const UnravelingConfig& config,
                            const FeedbackPolicy& policy, std::span<const double> grid,
                            std::span<const StateFunctional> functionals);

/// sum_records P |psi><psi| (or P rho).
DensityMatrix ensemble_average(std::span<const TrajectoryRecord> records);

}  // namespace jumpguard
