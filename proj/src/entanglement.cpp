#include "jumpguard/entanglement.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace jumpguard {

namespace {

constexpr double kClip = 1e-12;

double clip(double ev) { return (ev < 0.0 && ev > -kClip) ? 0.0 : ev; }

void require_two_qubits(std::size_t dim, const char* what) {
  if (dim != 4) throw DimensionError(std::string(what) + ": two-qubit state required");
}

Matrix sigma_y_pair() {
  const Matrix sy{{0.0, -kI}, {kI, 0.0}};
  return kron(sy, sy);
}

Matrix hermitian_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

}  // namespace

std::string_view measure_name(Measure m) {
  switch (m) {
    case Measure::concurrence:
      return "concurrence";
    case Measure::entanglement_of_formation:
      return "entanglement_of_formation";
    case Measure::negativity:
      return "negativity";
    case Measure::entropy_of_entanglement:
      return "entropy_of_entanglement";
  }
  return "unknown";
}

Measure parse_measure(std::string_view name) {
  for (Measure m : {Measure::concurrence, Measure::entanglement_of_formation, Measure::negativity,
                    Measure::entropy_of_entanglement})
    if (measure_name(m) == name) return m;
  throw std::invalid_argument("unknown entanglement measure: " + std::string(name));
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double concurrence_2q(const DensityMatrix& rho) {
  require_two_qubits(rho.rows(), "concurrence_2q");
  const Matrix h = hermitian_part(rho);
  const EigenSystem eig = hermitian_eigensystem(h);
  Matrix root(4, 4);
  for (std::size_t k = 0; k < 4; ++k) {
    const double ev = std::max(0.0, eig.values[k]);
    if (ev == 0.0) continue;
    const double s = std::sqrt(ev);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c)
        root(r, c) += s * eig.vectors(r, k) * std::conj(eig.vectors(c, k));
  }
  const Matrix yy = sigma_y_pair();
  const Matrix flipped = yy * h.conjugate() * yy;
  // Eigenvalues of sqrt(rho) rho~ sqrt(rho) are the squared Wootters lambdas.
  auto mu = hermitian_eigenvalues(hermitian_part(root * flipped * root));
  std::vector<double> lambda;
  for (double v : mu) lambda.push_back(std::sqrt(std::max(0.0, v)));
  std::sort(lambda.begin(), lambda.end(), std::greater<>());
  return std::max(0.0, lambda[0] - lambda[1] - lambda[2] - lambda[3]);
}

double concurrence_2q(const StateVector& psi) {
  require_two_qubits(psi.dim(), "concurrence_2q");
  StateVector conj_psi = psi;
  for (auto& z : conj_psi) z = std::conj(z);
  return std::abs(inner(psi, sigma_y_pair() * conj_psi)) / psi.norm_squared();
}

double eof_from_concurrence(double c) {
  c = std::clamp(c, 0.0, 1.0);
  return binary_entropy(0.5 * (1.0 + std::sqrt(1.0 - c * c)));
}

double eof_2q(const DensityMatrix& rho) { return eof_from_concurrence(concurrence_2q(rho)); }

double negativity(const DensityMatrix& rho, const SpaceLayout& layout) {
  const Matrix pt = hermitian_part(partial_transpose(rho, 1, layout));
  double neg = 0.0;
  for (double ev : hermitian_eigenvalues(pt)) {
    ev = clip(ev);
    if (ev < 0.0) neg -= ev;
  }
  return neg;
}

namespace {

std::vector<double> schmidt_weights(const StateVector& psi, const SpaceLayout& layout) {
  if (layout.slots() != 2 || psi.dim() != layout.total())
    throw DimensionError("pure-state entanglement: state does not match a bipartite layout");
  // Reduce onto the smaller factor.
  const std::size_t keep = layout.dim(0) <= layout.dim(1) ? 0 : 1;
  const Matrix reduced = partial_trace(psi.projector(), keep, layout);
  auto w = hermitian_eigenvalues(hermitian_part(reduced));
  for (double& v : w) v = std::max(0.0, clip(v));
  return w;
}

}  // namespace

double negativity(const StateVector& psi, const SpaceLayout& layout) {
  const auto w = schmidt_weights(psi, layout);
  double total = 0.0;
  double sum_root = 0.0;
  for (double v : w) {
    total += v;
    sum_root += std::sqrt(v);
  }
  return std::max(0.0, 0.5 * (sum_root * sum_root - total) / total);
}

double entanglement_entropy(const StateVector& psi, const SpaceLayout& layout) {
  if (std::abs(psi.norm_squared() - 1.0) > 1e-8)
    throw std::invalid_argument("entanglement_entropy: state must be normalized");
  double s = 0.0;
  for (double v : schmidt_weights(psi, layout))
    if (v > 0.0) s -= v * std::log2(v);
  return std::max(0.0, s);
}

double evaluate(Measure m, const ConditionalState& state, const SpaceLayout& layout) {
  if ((m == Measure::concurrence || m == Measure::entanglement_of_formation) && !(layout == SpaceLayout{2, 2}))
    throw DimensionError(std::string(measure_name(m)) + " requires a two-qubit layout");
  if (const auto* psi = std::get_if<StateVector>(&state)) {
    switch (m) {
      case Measure::concurrence:
        return concurrence_2q(*psi);
      case Measure::entanglement_of_formation:
        return eof_from_concurrence(concurrence_2q(*psi));
      case Measure::negativity:
        return negativity(*psi, layout);
      case Measure::entropy_of_entanglement:
        return entanglement_entropy(*psi, layout);
    }
  }
  const auto& rho = std::get<DensityMatrix>(state);
  switch (m) {
    case Measure::concurrence:
      return concurrence_2q(rho);
    case Measure::entanglement_of_formation:
      return eof_2q(rho);
    case Measure::negativity:
      return negativity(rho, layout);
    case Measure::entropy_of_entanglement:
      throw std::invalid_argument("entropy of entanglement is defined for pure states only");
  }
  throw std::logic_error("evaluate: unknown measure");
}

double average_entanglement(std::span<const TrajectoryRecord> records, Measure m, const SpaceLayout& layout) {
  double acc = 0.0;
  for (const auto& rec : records) {
    if (rec.probability == 0.0) continue;
    acc += rec.probability * evaluate(m, rec.state, layout);
  }
  return acc;
}

}  // namespace jumpguard
