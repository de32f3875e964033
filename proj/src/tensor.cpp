#include "jumpguard/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace jumpguard {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<Complex>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& row : rows) {
    if (row.size() != cols_) throw DimensionError("Matrix: ragged initializer");
    data_.insert(data_.end(), row.begin(), row.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

Matrix Matrix::basis_outer(std::size_t n, std::size_t ket, std::size_t bra) {
  if (ket >= n || bra >= n) throw DimensionError("basis_outer: index out of range");
  Matrix m(n, n);
  m(ket, bra) = 1.0;
  return m;
}

Matrix Matrix::adjoint() const {
  Matrix out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
  return out;
}

Matrix Matrix::transpose() const {
  Matrix out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
  return out;
}

Matrix Matrix::conjugate() const {
  Matrix out = *this;
  for (auto& z : out.data_) z = std::conj(z);
  return out;
}

Complex Matrix::trace() const {
  if (!is_square()) throw DimensionError("trace: matrix is not square");
  Complex t = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) t += (*this)(i, i);
  return t;
}

double Matrix::frobenius_norm() const {
  double s = 0.0;
  for (const auto& z : data_) s += std::norm(z);
  return std::sqrt(s);
}

double Matrix::max_abs_diff(const Matrix& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_)
    throw DimensionError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) m = std::max(m, std::abs(data_[i] - other.data_[i]));
  return m;
}

bool Matrix::is_hermitian(double tol) const {
  if (!is_square()) return false;
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = r; c < cols_; ++c)
      if (std::abs((*this)(r, c) - std::conj((*this)(c, r))) > tol) return false;
  return true;
}

bool Matrix::is_diagonal() const {
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c)
      if (r != c && (*this)(r, c) != Complex{}) return false;
  return true;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw DimensionError("matrix sum: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw DimensionError("matrix difference: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(Complex s) {
  for (auto& z : data_) z *= s;
  return *this;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols_ != b.rows_) throw DimensionError("matrix product: inner dimensions differ");
  Matrix out(a.rows_, b.cols_);
  for (std::size_t i = 0; i < a.rows_; ++i)
    for (std::size_t k = 0; k < a.cols_; ++k) {
      const Complex aik = a(i, k);
      if (aik == Complex{}) continue;
      for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

StateVector operator*(const Matrix& a, const StateVector& v) {
  if (a.cols_ != v.dim()) throw DimensionError("matrix-vector product: dimension mismatch");
  StateVector out(a.rows_);
  for (std::size_t i = 0; i < a.rows_; ++i) {
    Complex s = 0.0;
    for (std::size_t k = 0; k < a.cols_; ++k) s += a(i, k) * v[k];
    out[i] = s;
  }
  return out;
}

// ---------------------------------------------------------------------------

StateVector StateVector::basis(std::size_t dim, std::size_t index) {
  if (index >= dim) throw DimensionError("StateVector::basis: index out of range");
  StateVector v(dim);
  v[index] = 1.0;
  return v;
}

double StateVector::norm_squared() const {
  double s = 0.0;
  for (const auto& z : amps_) s += std::norm(z);
  return s;
}

double StateVector::norm() const { return std::sqrt(norm_squared()); }

StateVector StateVector::normalized() const {
  const double n = norm();
  if (n == 0.0) throw DimensionError("cannot normalize a zero vector");
  StateVector out = *this;
  out *= Complex{1.0 / n, 0.0};
  return out;
}

DensityMatrix StateVector::projector() const {
  Matrix out(dim(), dim());
  for (std::size_t r = 0; r < dim(); ++r)
    for (std::size_t c = 0; c < dim(); ++c) out(r, c) = amps_[r] * std::conj(amps_[c]);
  return out;
}

StateVector& StateVector::operator+=(const StateVector& other) {
  if (dim() != other.dim()) throw DimensionError("vector sum: dimension mismatch");
  for (std::size_t i = 0; i < amps_.size(); ++i) amps_[i] += other.amps_[i];
  return *this;
}

StateVector& StateVector::operator*=(Complex s) {
  for (auto& z : amps_) z *= s;
  return *this;
}

Complex inner(const StateVector& a, const StateVector& b) {
  if (a.dim() != b.dim()) throw DimensionError("inner: dimension mismatch");
  Complex s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double fidelity(const StateVector& a, const StateVector& b) {
  return std::norm(inner(a, b)) / (a.norm_squared() * b.norm_squared());
}

StateVector ket(std::initializer_list<std::size_t> local_indices, const SpaceLayout& layout) {
  if (local_indices.size() != layout.slots()) throw DimensionError("ket: one index per slot required");
  std::size_t index = 0;
  std::size_t slot = 0;
  for (std::size_t local : local_indices) {
    if (local >= layout.dim(slot)) throw DimensionError("ket: local index out of range");
    index = index * layout.dim(slot) + local;
    ++slot;
  }
  return StateVector::basis(layout.total(), index);
}

// ---------------------------------------------------------------------------

SpaceLayout::SpaceLayout(std::initializer_list<std::size_t> dims)
    : SpaceLayout(std::vector<std::size_t>(dims)) {}

SpaceLayout::SpaceLayout(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw DimensionError("SpaceLayout: at least one slot required");
  for (std::size_t d : dims_) {
    if (d == 0) throw DimensionError("SpaceLayout: zero local dimension");
    total_ *= d;
  }
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const Complex aij = a(i, j);
      for (std::size_t k = 0; k < b.rows(); ++k)
        for (std::size_t l = 0; l < b.cols(); ++l)
          out(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
    }
  return out;
}

StateVector kron(const StateVector& a, const StateVector& b) {
  StateVector out(a.dim() * b.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t k = 0; k < b.dim(); ++k) out[i * b.dim() + k] = a[i] * b[k];
  return out;
}

Matrix embed(const Matrix& local, std::size_t slot, const SpaceLayout& layout) {
  if (slot >= layout.slots()) throw DimensionError("embed: slot out of range");
  if (!local.is_square() || local.rows() != layout.dim(slot))
    throw DimensionError("embed: local operator does not match slot dimension");
  Matrix out = slot == 0 ? local : Matrix::identity(layout.dim(0));
  for (std::size_t s = 1; s < layout.slots(); ++s)
    out = kron(out, s == slot ? local : Matrix::identity(layout.dim(s)));
  return out;
}

namespace {

void check_bipartite(const Matrix& rho, std::size_t slot, const SpaceLayout& layout, const char* what) {
  if (layout.slots() != 2) throw DimensionError(std::string(what) + ": layout must have exactly 2 slots");
  if (slot >= 2) throw DimensionError(std::string(what) + ": slot out of range");
  if (!rho.is_square() || rho.rows() != layout.total())
    throw DimensionError(std::string(what) + ": matrix does not match layout dimension");
}

}  // namespace

Matrix partial_trace(const Matrix& rho, std::size_t keep, const SpaceLayout& layout) {
  check_bipartite(rho, keep, layout, "partial_trace");
  const std::size_t d0 = layout.dim(0);
  const std::size_t d1 = layout.dim(1);
  if (keep == 0) {
    Matrix out(d0, d0);
    for (std::size_t i = 0; i < d0; ++i)
      for (std::size_t j = 0; j < d0; ++j)
        for (std::size_t k = 0; k < d1; ++k) out(i, j) += rho(i * d1 + k, j * d1 + k);
    return out;
  }
  Matrix out(d1, d1);
  for (std::size_t k = 0; k < d1; ++k)
    for (std::size_t l = 0; l < d1; ++l)
      for (std::size_t i = 0; i < d0; ++i) out(k, l) += rho(i * d1 + k, i * d1 + l);
  return out;
}

Matrix partial_transpose(const Matrix& rho, std::size_t slot, const SpaceLayout& layout) {
  check_bipartite(rho, slot, layout, "partial_transpose");
  const std::size_t d0 = layout.dim(0);
  const std::size_t d1 = layout.dim(1);
  Matrix out(rho.rows(), rho.cols());
  for (std::size_t i = 0; i < d0; ++i)
    for (std::size_t j = 0; j < d0; ++j)
      for (std::size_t k = 0; k < d1; ++k)
        for (std::size_t l = 0; l < d1; ++l) {
          if (slot == 1)
            out(i * d1 + k, j * d1 + l) = rho(i * d1 + l, j * d1 + k);
          else
            out(i * d1 + k, j * d1 + l) = rho(j * d1 + k, i * d1 + l);
        }
  return out;
}

EigenSystem hermitian_eigensystem(const Matrix& m) {
  if (!m.is_square()) throw DimensionError("hermitian_eigensystem: matrix is not square");
  if (!m.is_hermitian(1e-10)) throw NotHermitianError("hermitian_eigensystem: matrix is not Hermitian");
  const std::size_t n = m.rows();

  Matrix a = m;
  for (std::size_t i = 0; i < n; ++i) a(i, i) = a(i, i).real();
  Matrix v = Matrix::identity(n);
  const double scale = a.frobenius_norm();

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += std::norm(a(p, q));
    if (std::sqrt(off) <= 1e-15 * scale || off == 0.0) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const Complex apq = a(p, q);
        const double mag = std::abs(apq);
        if (mag == 0.0) continue;
        const Complex phase = apq / mag;
        const double theta = (a(q, q).real() - a(p, p).real()) / (2.0 * mag);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // Unitary acting on the (p, q) plane: phase alignment then a real rotation.
        const Complex upp = c;
        const Complex upq = s;
        const Complex uqp = -s * std::conj(phase);
        const Complex uqq = c * std::conj(phase);

        for (std::size_t k = 0; k < n; ++k) {
          const Complex akp = a(k, p);
          const Complex akq = a(k, q);
          a(k, p) = akp * upp + akq * uqp;
          a(k, q) = akp * upq + akq * uqq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const Complex apk = a(p, k);
          const Complex aqk = a(q, k);
          a(p, k) = std::conj(upp) * apk + std::conj(uqp) * aqk;
          a(q, k) = std::conj(upq) * apk + std::conj(uqq) * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const Complex vkp = v(k, p);
          const Complex vkq = v(k, q);
          v(k, p) = vkp * upp + vkq * uqp;
          v(k, q) = vkp * upq + vkq * uqq;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i).real() < a(j, j).real(); });

  EigenSystem out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t col = 0; col < n; ++col) {
    out.values[col] = a(order[col], order[col]).real();
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, col) = v(r, order[col]);
  }
  return out;
}

std::vector<double> hermitian_eigenvalues(const Matrix& m) { return hermitian_eigensystem(m).values; }

Matrix expm(const Matrix& m) {
  if (!m.is_square()) throw DimensionError("expm: matrix is not square");
  const std::size_t n = m.rows();
  double norm1 = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    double col = 0.0;
    for (std::size_t r = 0; r < n; ++r) col += std::abs(m(r, c));
    norm1 = std::max(norm1, col);
  }
  int squarings = 0;
  if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  const Matrix a = std::ldexp(1.0, -squarings) * m;

  Matrix result = Matrix::identity(n);
  Matrix term = Matrix::identity(n);
  for (int k = 1; k <= 30; ++k) {
    term = (1.0 / k) * (term * a);
    result += term;
    if (term.frobenius_norm() < 1e-18 * result.frobenius_norm()) break;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

double trace_distance(const Matrix& a, const Matrix& b) {
  Matrix diff = a - b;
  // Symmetrize away rounding noise before the Hermitian solve.
  diff = 0.5 * (diff + diff.adjoint());
  double s = 0.0;
  for (double ev : hermitian_eigenvalues(diff)) s += std::abs(ev);
  return 0.5 * s;
}

// ---------------------------------------------------------------------------

SparseMatrix::SparseMatrix(const Matrix& dense) : dim_(dense.rows()) {
  if (!dense.is_square()) throw DimensionError("SparseMatrix: matrix is not square");
  for (std::size_t r = 0; r < dense.rows(); ++r)
    for (std::size_t c = 0; c < dense.cols(); ++c)
      if (dense(r, c) != Complex{}) entries_.push_back({r, c, dense(r, c)});
}

StateVector SparseMatrix::apply(const StateVector& v) const {
  StateVector out(dim_);
  for (const auto& e : entries_) out[e.row] += e.value * v[e.col];
  return out;
}

void SparseMatrix::sandwich_add(const Matrix& rho, double scale, Matrix& out) const {
  // out += scale * S rho S^dagger, i.e. sum over entry pairs (a, b) of
  // S_ra rho_ab conj(S_cb) placed at (r, c).
  for (const auto& left : entries_)
    for (const auto& right : entries_)
      out(left.row, right.row) += scale * left.value * rho(left.col, right.col) * std::conj(right.value);
}

double SparseMatrix::sandwich_trace(const Matrix& rho) const {
  Complex acc = 0.0;
  for (const auto& left : entries_)
    for (const auto& right : entries_)
      if (left.row == right.row) acc += left.value * rho(left.col, right.col) * std::conj(right.value);
  return acc.real();
}

QuadratureRule gauss_legendre(std::size_t n) {
  if (n == 0) throw std::invalid_argument("gauss_legendre: n must be positive");
  QuadratureRule rule;
  if (n == 1) return {{0.0}, {2.0}};
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double pi = std::acos(-1.0);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

}  // namespace jumpguard
