#pragma once

// Dense complex linear algebra for small composite Hilbert spaces.

#include <complex>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace jumpguard {

using Complex = std::complex<double>;

inline constexpr Complex kI{0.0, 1.0};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotHermitianError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class StateVector;

/// Dense complex matrix, row-major.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::initializer_list<std::initializer_list<Complex>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> values);
  /// |ket><bra| for computational basis indices.
  static Matrix basis_outer(std::size_t n, std::size_t ket, std::size_t bra);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool is_square() const { return rows_ == cols_; }
  bool empty() const { return data_.empty(); }

  Complex& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const Complex> data() const { return data_; }
  std::span<Complex> data() { return data_; }

  Matrix adjoint() const;
  Matrix transpose() const;
  Matrix conjugate() const;
  Complex trace() const;
  double frobenius_norm() const;
  /// Largest absolute entry of (this - other).
  double max_abs_diff(const Matrix& other) const;
  bool is_hermitian(double tol) const;
  bool is_diagonal() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(Complex s);

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, Complex s) { return a *= s; }
  friend Matrix operator*(Complex s, Matrix a) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= Complex{s, 0.0}; }
  friend Matrix operator*(const Matrix& a, const Matrix& b);
  friend StateVector operator*(const Matrix& a, const StateVector& v);
  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Complex> data_;
};

using DensityMatrix = Matrix;

class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(std::size_t dim) : amps_(dim) {}
  StateVector(std::initializer_list<Complex> amps) : amps_(amps) {}
  explicit StateVector(std::vector<Complex> amps) : amps_(std::move(amps)) {}

  static StateVector basis(std::size_t dim, std::size_t index);

  std::size_t dim() const { return amps_.size(); }
  Complex& operator[](std::size_t i) { return amps_[i]; }
  const Complex& operator[](std::size_t i) const { return amps_[i]; }
  std::span<const Complex> amplitudes() const { return amps_; }
  auto begin() { return amps_.begin(); }
  auto end() { return amps_.end(); }
  auto begin() const { return amps_.begin(); }
  auto end() const { return amps_.end(); }

  double norm_squared() const;
  double norm() const;
  /// Throws DimensionError on a zero vector.
  StateVector normalized() const;
  /// Projector |psi><psi| (no normalization applied).
  DensityMatrix projector() const;

  StateVector& operator+=(const StateVector& other);
  StateVector& operator*=(Complex s);
  friend StateVector operator+(StateVector a, const StateVector& b) { return a += b; }
  friend StateVector operator*(Complex s, StateVector a) { return a *= s; }
  friend StateVector operator*(double s, StateVector a) { return a *= Complex{s, 0.0}; }
  friend bool operator==(const StateVector& a, const StateVector& b) = default;

 private:
  std::vector<Complex> amps_;
};

/// <a|b>, conjugate-linear in a.
Complex inner(const StateVector& a, const StateVector& b);
/// |<a|b>|^2 / (|a|^2 |b|^2).
double fidelity(const StateVector& a, const StateVector& b);
/// Computational-basis vector built from local indices, e.g. ket({1, 2}, layout) = |12>.
class SpaceLayout;
StateVector ket(std::initializer_list<std::size_t> local_indices, const SpaceLayout& layout);

/// Tensor-product structure of a composite space.
class SpaceLayout {
 public:
  SpaceLayout() = default;
  SpaceLayout(std::initializer_list<std::size_t> dims);
  explicit SpaceLayout(std::vector<std::size_t> dims);

  std::size_t slots() const { return dims_.size(); }
  std::size_t dim(std::size_t slot) const { return dims_.at(slot); }
  std::size_t total() const { return total_; }
  const std::vector<std::size_t>& dims() const { return dims_; }

  friend bool operator==(const SpaceLayout&, const SpaceLayout&) = default;

 private:
  std::vector<std::size_t> dims_;
  std::size_t total_ = 1;
};

Matrix kron(const Matrix& a, const Matrix& b);
StateVector kron(const StateVector& a, const StateVector& b);

/// Lifts a local operator on `slot` to the full space (identity elsewhere).
Matrix embed(const Matrix& local, std::size_t slot, const SpaceLayout& layout);

/// Reduced density matrix of the kept slot of a bipartite layout.
Matrix partial_trace(const Matrix& rho, std::size_t keep, const SpaceLayout& layout);

Matrix partial_transpose(const Matrix& rho, std::size_t slot, const SpaceLayout& layout);

struct EigenSystem {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column i pairs with values[i]
};

/// Cyclic complex Jacobi. Input must be Hermitian within 1e-10.
EigenSystem hermitian_eigensystem(const Matrix& m);
std::vector<double> hermitian_eigenvalues(const Matrix& m);

/// Matrix exponential by scaling and squaring of a Taylor series.
Matrix expm(const Matrix& m);

/// Trace norm distance 0.5 * ||a - b||_1 for Hermitian a, b.
double trace_distance(const Matrix& a, const Matrix& b);

/// Sparse triplet form used inside time-stepping loops.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  explicit SparseMatrix(const Matrix& dense);

  std::size_t dim() const { return dim_; }
  std::size_t nonzeros() const { return entries_.size(); }

  StateVector apply(const StateVector& v) const;
  /// S rho S^dagger, accumulated into out with a scale factor.
  void sandwich_add(const Matrix& rho, double scale, Matrix& out) const;
  /// tr(S rho S^dagger) without forming the product.
  double sandwich_trace(const Matrix& rho) const;

 private:
  struct Entry {
    std::size_t row;
    std::size_t col;
    Complex value;
  };
  std::size_t dim_ = 0;
  std::vector<Entry> entries_;
};

struct QuadratureRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule.
QuadratureRule gauss_legendre(std::size_t n);

/// Classical fourth-order Runge-Kutta step for an autonomous flow x' = f(x).
template <typename State, typename Flow>
State rk4_step(const State& x, Flow&& f, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  const State k1 = f(x);
  const State k2 = f(x + (0.5 * dt) * k1);
  const State k3 = f(x + (0.5 * dt) * k2);
  const State k4 = f(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace jumpguard
