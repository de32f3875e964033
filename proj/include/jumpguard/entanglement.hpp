#pragma once

// Entanglement quantifiers for bipartite states and trajectory-ensemble averages.

#include <span>
#include <string_view>

#include "jumpguard/tensor.hpp"
#include "jumpguard/trajectories.hpp"

namespace jumpguard {

enum class Measure { concurrence, entanglement_of_formation, negativity, entropy_of_entanglement };

std::string_view measure_name(Measure m);
/// Inverse of measure_name; throws std::invalid_argument on unknown names.
Measure parse_measure(std::string_view name);

/// -p log2 p - (1-p) log2 (1-p).
double binary_entropy(double p);

/// Wootters concurrence of a two-qubit density matrix.
double concurrence_2q(const DensityMatrix& rho);
/// |<psi| sigma_y x sigma_y |psi*>|.
double concurrence_2q(const StateVector& psi);
/// E_F = h((1 + sqrt(1 - C^2)) / 2).
double eof_from_concurrence(double c);
double eof_2q(const DensityMatrix& rho);

/// |sum of negative eigenvalues of rho^{T_B}|.
double negativity(const DensityMatrix& rho, const SpaceLayout& layout);
/// Pure-state negativity from the Schmidt coefficients.
double negativity(const StateVector& psi, const SpaceLayout& layout);

/// Von Neumann entropy (base 2) of either reduced state. psi must be normalized.
double entanglement_entropy(const StateVector& psi, const SpaceLayout& layout);

double evaluate(Measure m, const ConditionalState& state, const SpaceLayout& layout);

/// sum_j P_j E(state_j) over the records.
double average_entanglement(std::span<const TrajectoryRecord> records, Measure m, const SpaceLayout& layout);

}  // namespace jumpguard
