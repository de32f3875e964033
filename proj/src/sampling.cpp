#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <map>
#include <random>
#include <thread>

#include "jumpguard/trajectories.hpp"
#include "propagator.hpp"

namespace jumpguard {

namespace {

constexpr std::size_t kChunk = 64;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-trajectory stream, a function of (seed, index) only.
class TrajectoryRng {
 public:
  TrajectoryRng(std::uint64_t seed, std::uint64_t index) : engine_(splitmix64(seed ^ splitmix64(index))) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

/// One-step Kraus operators for a step h. Jumps sit at the step midpoint:
/// M_k = sqrt(gamma_k h) exp(-G h/2) L_k exp(-G h/2).
struct StepKernel {
  double h = 0.0;
  SparseMatrix no_jump;
  std::vector<SparseMatrix> jump;      // uncorrected
  std::vector<SparseMatrix> corrected; // correction applied right after the jump
  /// Unrecorded double jumps, (h/sqrt 2) sqrt(gamma_k gamma_l) L_k L_l; built only when eta < 1.
  std::vector<SparseMatrix> double_jump;
};

class Stepper {
 public:
  Stepper(const OpenSystemModel& model, const FeedbackPolicy& policy)
      : model_(model), policy_(policy), propagator_(model) {
    for (std::size_t k = 0; k < model.channels().size(); ++k) {
      const auto& ch = model.channels()[k];
      if (ch.rate == 0.0) continue;
      active_.push_back(k);
    }
    const std::size_t slots = model.layout().slots();
    for (std::size_t slot = 0; slot < slots; ++slot)
      slot_corrections_.push_back(policy.corrects(slot)
                                      ? SparseMatrix(embed(policy.corrections[slot], slot, model.layout()))
                                      : SparseMatrix());
  }

  const StepKernel& kernel(double h) {
    auto it = kernels_.lower_bound(h * (1.0 - 1e-12));
    if (it != kernels_.end() && it->first <= h * (1.0 + 1e-12)) return it->second;
    StepKernel k;
    k.h = h;
    k.no_jump = SparseMatrix(propagator_.matrix(h));
    const Matrix half = propagator_.matrix(0.5 * h);
    const bool immediate = policy_.enabled && policy_.delay == 0.0;
    for (std::size_t idx : active_) {
      const auto& ch = model_.channels()[idx];
      const Matrix core = std::sqrt(ch.rate * h) * model_.full_jump(idx);
      k.jump.emplace_back(half * core * half);
      if (immediate && policy_.corrects(ch.slot)) {
        const Matrix u = embed(policy_.corrections[ch.slot], ch.slot, model_.layout());
        k.corrected.emplace_back(half * u * core * half);
      } else {
        k.corrected.push_back(k.jump.back());
      }
    }
    if (policy_.efficiency < 1.0) {
      for (std::size_t a : active_)
        for (std::size_t b : active_) {
          const double scale = h * std::sqrt(0.5 * model_.channels()[a].rate * model_.channels()[b].rate);
          SparseMatrix op(half * (scale * (model_.full_jump(a) * model_.full_jump(b))) * half);
          if (op.nonzeros() > 0) k.double_jump.push_back(std::move(op));
        }
    }
    return kernels_.emplace(h, std::move(k)).first->second;
  }

  const std::vector<std::size_t>& active() const { return active_; }
  const SparseMatrix& correction(std::size_t slot) const { return slot_corrections_[slot]; }
  bool delayed_feedback(std::size_t slot) const { return policy_.delay > 0.0 && policy_.corrects(slot); }
  double delay() const { return policy_.delay; }
  double efficiency() const { return policy_.efficiency; }
  const OpenSystemModel& model() const { return model_; }

 private:
  const OpenSystemModel& model_;
  const FeedbackPolicy& policy_;
  detail::NoJumpPropagator propagator_;
  std::vector<std::size_t> active_;
  std::vector<SparseMatrix> slot_corrections_;
  std::map<double, StepKernel> kernels_;
};

struct PendingCorrection {
  double due;
  std::size_t slot;
};

/// Step schedule: the number of steps per grid interval.
struct Schedule {
  std::vector<double> times;
  std::vector<std::size_t> steps;  // steps[i] covers (times[i-1], times[i]], times[-1] = 0
  std::vector<double> step_size;
};

Schedule make_schedule(std::span<const double> grid, double dt) {
  Schedule s;
  double prev = 0.0;
  for (double t : grid) {
    if (t < prev) throw std::invalid_argument("sample_series: grid must be ascending and non-negative");
    const double span = t - prev;
    const auto n = span > 0.0 ? static_cast<std::size_t>(std::ceil(span / dt - 1e-9)) : 0;
    s.times.push_back(t);
    s.steps.push_back(n);
    s.step_size.push_back(n > 0 ? span / static_cast<double>(n) : 0.0);
    prev = t;
  }
  return s;
}

/// Shared driver for pure-state (eta = 1) and density-matrix (eta < 1) trajectories.
class Trajectory {
 public:
  Trajectory(Stepper& stepper, const StateVector& psi0, std::uint64_t seed, std::uint64_t index)
      : stepper_(stepper), rng_(seed, index), mixed_(stepper.efficiency() < 1.0) {
    if (mixed_)
      rho_ = psi0.projector();
    else
      psi_ = psi0;
  }

  template <typename Visit>
  void run(const Schedule& schedule, Visit&& visit) {
    double t = 0.0;
    for (std::size_t g = 0; g < schedule.times.size(); ++g) {
      const std::size_t n = schedule.steps[g];
      if (n > 0) {
        const StepKernel& k = stepper_.kernel(schedule.step_size[g]);
        for (std::size_t s = 0; s < n; ++s) {
          if (mixed_)
            step_mixed(k, t);
          else
            step_pure(k, t);
          t += k.h;
          apply_due_corrections(t, k.h);
        }
      }
      t = schedule.times[g];
      visit(g, state(), events_);
    }
  }

  ConditionalState state() const {
    if (mixed_) return rho_;
    return psi_;
  }
  const std::vector<JumpEvent>& events() const { return events_; }

 private:
  void record_jump(std::size_t action, double t_mid) {
    const std::size_t channel = stepper_.active()[action];
    const std::size_t slot = stepper_.model().channels()[channel].slot;
    events_.push_back({t_mid, slot, channel});
    if (stepper_.delayed_feedback(slot)) pending_.push_back({t_mid + stepper_.delay(), slot});
  }

  void step_pure(const StepKernel& k, double t) {
    StateVector next = k.no_jump.apply(psi_);
    const double p0 = next.norm_squared();
    const double u = rng_.uniform();
    if (u < p0 || k.jump.empty()) {
      psi_ = (1.0 / std::sqrt(p0)) * next;
      return;
    }
    std::vector<double> weights;
    double total = 0.0;
    for (const auto& op : k.jump) {
      weights.push_back(op.apply(psi_).norm_squared());
      total += weights.back();
    }
    if (total <= 0.0) {
      psi_ = (1.0 / std::sqrt(p0)) * next;
      return;
    }
    const double target = (u - p0) / (1.0 - p0) * total;
    std::size_t a = 0;
    double cumulative = weights[0];
    while (a + 1 < weights.size() && target >= cumulative) cumulative += weights[++a];
    next = k.corrected[a].apply(psi_);
    psi_ = (1.0 / next.norm()) * next;
    record_jump(a, t + 0.5 * k.h);
  }

  void step_mixed(const StepKernel& k, double t) {
    const std::size_t n = rho_.rows();
    if (unrecorded_.rows() != n) {
      unrecorded_ = Matrix(n, n);
      scratch_ = Matrix(n, n);
    }
    const double eta = stepper_.efficiency();
    std::fill(unrecorded_.data().begin(), unrecorded_.data().end(), Complex{});
    k.no_jump.sandwich_add(rho_, 1.0, unrecorded_);
    weights_.clear();
    for (const auto& op : k.jump) {
      weights_.push_back(eta * op.sandwich_trace(rho_));
      if (eta < 1.0) op.sandwich_add(rho_, 1.0 - eta, unrecorded_);
    }
    for (const auto& op : k.double_jump) op.sandwich_add(rho_, (1.0 - eta) * (1.0 - eta), unrecorded_);
    const double w0 = unrecorded_.trace().real();
    double total = w0;
    for (double w : weights_) total += w;
    const double target = rng_.uniform() * total;
    if (target < w0 || total == w0) {
      std::swap(rho_, unrecorded_);
      rho_ *= Complex{1.0 / w0, 0.0};
      return;
    }
    double cumulative = w0;
    std::size_t a = 0;
    while (a + 1 < weights_.size() && target >= cumulative + weights_[a]) cumulative += weights_[a++];
    std::fill(scratch_.data().begin(), scratch_.data().end(), Complex{});
    k.corrected[a].sandwich_add(rho_, 1.0, scratch_);
    std::swap(rho_, scratch_);
    rho_ *= Complex{1.0 / rho_.trace().real(), 0.0};
    record_jump(a, t + 0.5 * k.h);
  }

  void apply_due_corrections(double t, double h) {
    while (!pending_.empty() && pending_.front().due <= t + 0.5 * h) {
      const SparseMatrix& u = stepper_.correction(pending_.front().slot);
      if (mixed_) {
        Matrix next(rho_.rows(), rho_.cols());
        u.sandwich_add(rho_, 1.0, next);
        rho_ = std::move(next);
      } else {
        psi_ = u.apply(psi_);
      }
      pending_.pop_front();
    }
  }

  Stepper& stepper_;
  TrajectoryRng rng_;
  bool mixed_;
  StateVector psi_;
  DensityMatrix rho_;
  Matrix unrecorded_;
  Matrix scratch_;
  std::vector<double> weights_;
  std::vector<JumpEvent> events_;
  std::deque<PendingCorrection> pending_;
};

void check_inputs(const OpenSystemModel& model, const StateVector& psi0, const UnravelingConfig& config,
                  const FeedbackPolicy& policy) {
  if (psi0.dim() != model.dim()) throw DimensionError("sampled unraveling: state does not match model");
  if (!(config.dt > 0.0)) throw std::invalid_argument("sampled unraveling: dt must be positive");
  if (model.max_rate() * config.dt > 1e-2)
    throw std::invalid_argument("sampled unraveling: max_rate * dt must not exceed 1e-2");
  if (config.n_samples == 0) throw std::invalid_argument("sampled unraveling: n_samples must be at least 1");
  policy.validate(model.layout());
}

/// Runs `body(first, last, stepper)` over fixed chunks of trajectory indices on worker threads.
template <typename Body>
void for_each_chunk(const OpenSystemModel& model, const FeedbackPolicy& policy, std::size_t n, Body&& body) {
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(chunks, std::thread::hardware_concurrency()));
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    Stepper stepper(model, policy);
    for (std::size_t c = next++; c < chunks; c = next++) body(c, c * kChunk, std::min(n, (c + 1) * kChunk), stepper);
  };
  if (workers == 1) {
    work();
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
}

StateVector normalized_initial(const StateVector& psi0) { return psi0.normalized(); }

}  // namespace

std::vector<TrajectoryRecord> sample_trajectories(const OpenSystemModel& model, const StateVector& psi0,
                                                  const UnravelingConfig& config, const FeedbackPolicy& policy) {
  check_inputs(model, psi0, config, policy);
  const StateVector start = normalized_initial(psi0);
  const double grid[] = {config.t_max};
  const Schedule schedule = make_schedule(grid, config.dt);
  const double weight = 1.0 / static_cast<double>(config.n_samples);

  std::vector<TrajectoryRecord> records(config.n_samples);
  for_each_chunk(model, policy, config.n_samples,
                 [&](std::size_t, std::size_t first, std::size_t last, Stepper& stepper) {
                   for (std::size_t i = first; i < last; ++i) {
                     Trajectory traj(stepper, start, config.seed, i);
                     traj.run(schedule, [](std::size_t, const ConditionalState&, const std::vector<JumpEvent>&) {});
                     records[i] = {traj.events(), traj.state(), weight};
                   }
                 });
  return records;
}

SampledSeries sample_series(const OpenSystemModel& model, const StateVector& psi0, const UnravelingConfig& config,
                            const FeedbackPolicy& policy, std::span<const double> grid,
                            std::span<const StateFunctional> functionals) {
  check_inputs(model, psi0, config, policy);
  const StateVector start = normalized_initial(psi0);
  const Schedule schedule = make_schedule(grid, config.dt);
  const std::size_t n_grid = grid.size();
  const std::size_t n_f = functionals.size();
  const std::size_t n = config.n_samples;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;

  // Per-chunk partial sums, combined in chunk order so results do not depend on thread count.
  struct Partial {
    std::vector<double> sum, sum_sq, quiet;
  };
  std::vector<Partial> partials(chunks);
  for_each_chunk(model, policy, n, [&](std::size_t c, std::size_t first, std::size_t last, Stepper& stepper) {
    Partial& p = partials[c];
    p.sum.assign(n_f * n_grid, 0.0);
    p.sum_sq.assign(n_f * n_grid, 0.0);
    p.quiet.assign(n_grid, 0.0);
    for (std::size_t i = first; i < last; ++i) {
      Trajectory traj(stepper, start, config.seed, i);
      traj.run(schedule, [&](std::size_t g, const ConditionalState& state, const std::vector<JumpEvent>& events) {
        if (events.empty()) p.quiet[g] += 1.0;
        for (std::size_t f = 0; f < n_f; ++f) {
          const double v = functionals[f](state);
          p.sum[f * n_grid + g] += v;
          p.sum_sq[f * n_grid + g] += v * v;
        }
      });
    }
  });

  SampledSeries out;
  out.times.assign(grid.begin(), grid.end());
  out.samples = n;
  out.mean.assign(n_f, std::vector<double>(n_grid, 0.0));
  out.std_error.assign(n_f, std::vector<double>(n_grid, 0.0));
  out.no_event_fraction.assign(n_grid, 0.0);
  std::vector<double> sum(n_f * n_grid, 0.0), sum_sq(n_f * n_grid, 0.0);
  for (const auto& p : partials) {
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += p.sum[i];
      sum_sq[i] += p.sum_sq[i];
    }
    for (std::size_t g = 0; g < n_grid; ++g) out.no_event_fraction[g] += p.quiet[g];
  }
  const double nn = static_cast<double>(n);
  for (std::size_t g = 0; g < n_grid; ++g) out.no_event_fraction[g] /= nn;
  for (std::size_t f = 0; f < n_f; ++f)
    for (std::size_t g = 0; g < n_grid; ++g) {
      const double mean = sum[f * n_grid + g] / nn;
      const double var = n > 1 ? std::max(0.0, (sum_sq[f * n_grid + g] - nn * mean * mean) / (nn - 1.0)) : 0.0;
      out.mean[f][g] = mean;
      out.std_error[f][g] = std::sqrt(var / nn);
    }
  return out;
}

}  // namespace jumpguard
