#include "jumpguard/open_system.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jumpguard {

OpenSystemModel::OpenSystemModel(SpaceLayout layout, std::vector<DecayChannel> channels,
                                 std::optional<Matrix> hamiltonian)
    : layout_(std::move(layout)), channels_(std::move(channels)), hamiltonian_(std::move(hamiltonian)) {
  const std::size_t n = layout_.total();
  effective_decay_ = Matrix(n, n);
  double largest_rate = 0.0;
  for (const auto& ch : channels_) {
    if (ch.slot >= layout_.slots()) throw DimensionError("OpenSystemModel: channel slot out of range");
    if (!(ch.rate >= 0.0)) throw std::invalid_argument("OpenSystemModel: channel rate must be non-negative");
    full_jumps_.push_back(embed(ch.jump_operator, ch.slot, layout_));
    const Matrix& l = full_jumps_.back();
    effective_decay_ += (0.5 * ch.rate) * (l.adjoint() * l);
    largest_rate = std::max(largest_rate, ch.rate);
  }
  generator_ = effective_decay_;
  if (hamiltonian_) {
    if (hamiltonian_->rows() != n || !hamiltonian_->is_square())
      throw DimensionError("OpenSystemModel: Hamiltonian does not match layout dimension");
    if (!hamiltonian_->is_hermitian(1e-10)) throw NotHermitianError("OpenSystemModel: Hamiltonian is not Hermitian");
    generator_ += kI * *hamiltonian_;
  }
  const auto spectrum = hermitian_eigenvalues(effective_decay_);
  max_rate_ = std::max(largest_rate, spectrum.empty() ? 0.0 : 2.0 * spectrum.back());
}

Matrix lowering_operator(std::size_t dim) {
  if (dim < 2) throw DimensionError("lowering_operator: dimension must be at least 2");
  Matrix a(dim, dim);
  for (std::size_t level = 1; level < dim; ++level) a(level - 1, level) = std::sqrt(static_cast<double>(level));
  return a;
}

std::vector<LocalChannel> build_qutrit_cascade(const CascadeSpec& spec) {
  if (spec.gamma21 < 0.0 || spec.gamma10 < 0.0)
    throw std::invalid_argument("build_qutrit_cascade: rates must be non-negative");
  const Matrix down21 = Matrix::basis_outer(3, 1, 2);
  const Matrix down10 = Matrix::basis_outer(3, 0, 1);

  switch (spec.kind) {
    case CascadeKind::degenerate:
      if (spec.gamma21 != spec.gamma10)
        throw std::invalid_argument("build_qutrit_cascade: degenerate cascade needs gamma21 == gamma10");
      return {{down21 + down10, spec.gamma10}};
    case CascadeKind::harmonic_oscillator:
      if (spec.gamma21 != 2.0 * spec.gamma10)
        throw std::invalid_argument("build_qutrit_cascade: oscillator cascade needs gamma21 == 2 gamma10");
      return {{down10 + std::sqrt(2.0) * down21, spec.gamma10}};
    case CascadeKind::custom:
      if (spec.distinguishable) return {{down21, spec.gamma21}, {down10, spec.gamma10}};
      if (spec.gamma10 == 0.0) return {{down21, spec.gamma21}};
      return {{down10 + std::sqrt(spec.gamma21 / spec.gamma10) * down21, spec.gamma10}};
  }
  throw std::logic_error("build_qutrit_cascade: unknown cascade kind");
}

std::vector<LocalChannel> thermal_channels(double gamma, const ThermalSpec& spec, std::size_t dim) {
  if (gamma < 0.0) throw std::invalid_argument("thermal_channels: gamma must be non-negative");
  if (!(spec.nbar >= 0.0)) throw std::invalid_argument("thermal_channels: nbar must be non-negative");
  const Matrix a = lowering_operator(dim);
  std::vector<LocalChannel> out{{a, gamma * (spec.nbar + 1.0)}};
  if (spec.nbar > 0.0) out.push_back({a.adjoint(), gamma * spec.nbar});
  return out;
}

OpenSystemModel build_local_model(const SpaceLayout& layout,
                                  const std::vector<std::vector<LocalChannel>>& slot_channels) {
  if (slot_channels.size() != layout.slots())
    throw DimensionError("build_local_model: one channel list per slot required");
  std::vector<DecayChannel> channels;
  for (std::size_t slot = 0; slot < slot_channels.size(); ++slot)
    for (const auto& ch : slot_channels[slot]) channels.push_back({slot, ch.jump_operator, ch.rate});
  return OpenSystemModel(layout, std::move(channels));
}

OpenSystemModel build_qubit_pair(double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("build_qubit_pair: gamma must be non-negative");
  const std::vector<LocalChannel> local{{lowering_operator(2), gamma}};
  return build_local_model(SpaceLayout{2, 2}, {local, local});
}

OpenSystemModel build_qutrit_pair(const CascadeSpec& spec) {
  const auto local = build_qutrit_cascade(spec);
  return build_local_model(SpaceLayout{3, 3}, {local, local});
}

OpenSystemModel build_thermal_oscillator(double gamma, const ThermalSpec& spec, std::size_t dim) {
  return build_local_model(SpaceLayout{dim}, {thermal_channels(gamma, spec, dim)});
}

DensityMatrix lindblad_rhs(const OpenSystemModel& model, const DensityMatrix& rho) {
  if (!rho.is_square() || rho.rows() != model.dim())
    throw DimensionError("lindblad_rhs: density matrix does not match model dimension");
  const Matrix& g = model.no_jump_generator();
  // -G rho - rho G^dagger carries both the anticommutator and the commutator.
  Matrix out = -1.0 * (g * rho) - rho * g.adjoint();
  for (std::size_t k = 0; k < model.channels().size(); ++k) {
    const double rate = model.channels()[k].rate;
    if (rate == 0.0) continue;
    const Matrix& l = model.full_jump(k);
    out += rate * (l * rho * l.adjoint());
  }
  return out;
}

std::vector<DensityMatrix> evolve_master(const OpenSystemModel& model, const DensityMatrix& rho0,
                                         std::span<const double> t_grid, double step_rate_bound) {
  if (!rho0.is_square() || rho0.rows() != model.dim())
    throw DimensionError("evolve_master: initial state does not match model dimension");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (t_grid[i] < 0.0) throw std::invalid_argument("evolve_master: grid times must be non-negative");
    if (i > 0 && !(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("evolve_master: grid must be ascending");
  }
  const auto flow = [&model](const DensityMatrix& rho) { return lindblad_rhs(model, rho); };
  const double rate = model.max_rate();

  std::vector<DensityMatrix> out;
  out.reserve(t_grid.size());
  DensityMatrix rho = rho0;
  double t = 0.0;
  for (double target : t_grid) {
    const double span = target - t;
    if (span > 0.0 && rate > 0.0) {
      const auto steps = static_cast<std::size_t>(std::ceil(span * rate / step_rate_bound));
      const double h = span / static_cast<double>(steps);
      for (std::size_t s = 0; s < steps; ++s) rho = rk4_step(rho, flow, h);
    }
    t = target;
    out.push_back(rho);
  }
  return out;
}

}  // namespace jumpguard
