#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "jumpguard/trajectories.hpp"
#include "propagator.hpp"

namespace jumpguard {

namespace {

constexpr double kReturnTolerance = 1e-12;

struct ChannelAction {
  std::size_t channel;
  std::size_t slot;
  double rate;
  SparseMatrix op;  // L_k, followed by the slot correction when feedback is on
};

struct PointEval {
  StateVector psi;  // normalized conditional state
  double norm2 = 0.0;
  std::vector<double> rates;  // gamma_k |L_k psi|^2 per action
  std::vector<StateVector> jumped;  // normalized post-jump states (empty when rate is zero)
  std::vector<bool> returns;
};

class Enumerator {
 public:
  Enumerator(const OpenSystemModel& model, const UnravelingConfig& config, const FeedbackPolicy& policy)
      : model_(model), config_(config), propagator_(model) {
    for (std::size_t k = 0; k < model.channels().size(); ++k) {
      const auto& ch = model.channels()[k];
      if (ch.rate == 0.0) continue;
      Matrix op = model.full_jump(k);
      if (policy.corrects(ch.slot)) op = embed(policy.corrections[ch.slot], ch.slot, model.layout()) * op;
      actions_.push_back({k, ch.slot, ch.rate, SparseMatrix(op)});
    }
  }

  EnumerationResult run(const StateVector& psi0) {
    std::vector<JumpEvent> events;
    expand(psi0.normalized(), 0.0, 1.0, events);
    return std::move(result_);
  }

 private:
  std::size_t order_for(double length) const {
    if (config_.quadrature_order > 0) return config_.quadrature_order;
    const double scale = model_.max_rate() * length;
    return static_cast<std::size_t>(std::clamp(std::ceil(8.0 + 0.25 * scale), 8.0, 40.0));
  }

  const QuadratureRule& rule_for(double length) const {
    const std::size_t m = order_for(length);
    auto it = rules_.find(m);
    if (it == rules_.end()) it = rules_.emplace(m, gauss_legendre(m)).first;
    return it->second;
  }

  PointEval evaluate(const StateVector& psi_s, double elapsed) const {
    PointEval e;
    const StateVector phi = propagator_.apply(psi_s, elapsed);
    e.norm2 = phi.norm_squared();
    e.psi = (1.0 / std::sqrt(e.norm2)) * phi;
    for (const auto& act : actions_) {
      StateVector chi = act.op.apply(e.psi);
      const double n2 = chi.norm_squared();
      e.rates.push_back(act.rate * n2);
      if (n2 > 0.0) {
        chi *= Complex{1.0 / std::sqrt(n2), 0.0};
        e.returns.push_back(std::norm(inner(e.psi, chi)) >= 1.0 - kReturnTolerance);
        e.jumped.push_back(std::move(chi));
      } else {
        e.returns.push_back(true);
        e.jumped.emplace_back();
      }
    }
    return e;
  }

  double returning_rate(const PointEval& e, const std::vector<bool>& returning) const {
    double r = 0.0;
    for (std::size_t a = 0; a < actions_.size(); ++a)
      if (returning[a]) r += e.rates[a];
    return r;
  }

  /// Integral of the returning rate over (0, elapsed) from the node start.
  double integrated_return(const StateVector& psi_s, double elapsed, const std::vector<bool>& returning) const {
    const QuadratureRule& rule = rule_for(elapsed);
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double t = 0.5 * elapsed * (rule.nodes[i] + 1.0);
      acc += 0.5 * elapsed * rule.weights[i] * returning_rate(evaluate(psi_s, t), returning);
    }
    return acc;
  }

  void add_truncated(double mass) {
    result_.truncation_mass += mass;
    if (result_.truncation_mass > config_.truncation_bound) {
      std::ostringstream msg;
      msg << "trajectory enumeration truncated more than " << config_.truncation_bound
          << " probability mass at max_jumps = " << config_.max_jumps
          << "; increase max_jumps or use sampled mode";
      throw TruncationError(msg.str(), result_.truncation_mass);
    }
  }

  void expand(const StateVector& psi_s, double s, double mass, std::vector<JumpEvent>& events) {
    const double length = config_.t_max - s;
    if (length <= 0.0 || actions_.empty()) {
      result_.records.push_back({events, psi_s, mass});
      return;
    }

    const QuadratureRule& rule = rule_for(length);
    const std::size_t m = rule.nodes.size();
    std::vector<PointEval> points;
    points.reserve(m);
    for (std::size_t i = 0; i < m; ++i) points.push_back(evaluate(psi_s, 0.5 * length * (rule.nodes[i] + 1.0)));
    const PointEval start = evaluate(psi_s, 0.0);
    const PointEval end = evaluate(psi_s, length);

    // A channel is folded back into this branch when its corrected jump
    // reproduces the no-jump conditional state everywhere on (s, t_max).
    // Channels that never fire here contribute nothing either way.
    std::vector<bool> returning(actions_.size(), true);
    bool any_returning = false;
    for (std::size_t a = 0; a < actions_.size(); ++a) {
      returning[a] = start.returns[a] && end.returns[a];
      bool fires = start.rates[a] > 0.0 || end.rates[a] > 0.0;
      for (const auto& p : points) {
        returning[a] = returning[a] && p.returns[a];
        fires = fires || p.rates[a] > 0.0;
      }
      any_returning = any_returning || (returning[a] && fires);
    }

    const auto survival = [&](const PointEval& p, double elapsed) {
      if (!any_returning) return p.norm2;
      return p.norm2 * std::exp(integrated_return(psi_s, elapsed, returning));
    };

    for (std::size_t i = 0; i < m; ++i) {
      const double elapsed = 0.5 * length * (rule.nodes[i] + 1.0);
      const double weight = 0.5 * length * rule.weights[i];
      const PointEval& p = points[i];
      double surv = -1.0;
      for (std::size_t a = 0; a < actions_.size(); ++a) {
        if (returning[a] || p.rates[a] == 0.0) continue;
        if (surv < 0.0) surv = survival(p, elapsed);
        const double child_mass = mass * surv * p.rates[a] * weight;
        if (events.size() + 1 > config_.max_jumps) {
          add_truncated(child_mass);
          continue;
        }
        events.push_back({s + elapsed, actions_[a].slot, actions_[a].channel});
        expand(p.jumped[a], s + elapsed, child_mass, events);
        events.pop_back();
      }
    }

    result_.records.push_back({events, end.psi, mass * survival(end, length)});
  }

  const OpenSystemModel& model_;
  const UnravelingConfig& config_;
  detail::NoJumpPropagator propagator_;
  std::vector<ChannelAction> actions_;
  mutable std::map<std::size_t, QuadratureRule> rules_;
  EnumerationResult result_;
};

}  // namespace

EnumerationResult enumerate_trajectories(const OpenSystemModel& model, const StateVector& psi0,
                                         const UnravelingConfig& config, const FeedbackPolicy& policy) {
  if (psi0.dim() != model.dim()) throw DimensionError("enumerate_trajectories: state does not match model");
  if (!(config.t_max >= 0.0)) throw std::invalid_argument("enumerate_trajectories: t_max must be non-negative");
  policy.validate(model.layout());
  if (policy.efficiency != 1.0)
    throw std::invalid_argument("enumerate_trajectories: exact mode requires detection efficiency 1; use sampled mode");
  if (policy.enabled && policy.delay != 0.0)
    throw std::invalid_argument("enumerate_trajectories: exact mode requires zero feedback delay; use sampled mode");
  return Enumerator(model, config, policy).run(psi0);
}

}  // namespace jumpguard
