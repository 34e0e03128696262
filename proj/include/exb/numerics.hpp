#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace exb {

inline constexpr int kMaxDim = 8;

/// Dense symmetric matrix of dimension 1..8, stored as its upper triangle
/// in row-major order.
class SymMatrix {
 public:
  explicit SymMatrix(int n);

  static SymMatrix identity(int n);
  static SymMatrix diagonal(std::span<const double> d);
  /// Upper triangle, row-major: (0,0),(0,1),...,(0,n-1),(1,1),...
  static SymMatrix from_upper(int n, std::span<const double> upper);
  /// Full row-major n*n matrix; the lower triangle must mirror the upper one.
  static SymMatrix from_full(int n, std::span<const double> rows);
  /// Rank-one a * v v^T.
  static SymMatrix outer(std::span<const double> v, double a = 1.0);

  int dim() const noexcept { return n_; }
  std::size_t entry_count() const noexcept { return static_cast<std::size_t>(n_ * (n_ + 1) / 2); }

  double operator()(int i, int j) const noexcept { return a_[index(i, j)]; }
  void set(int i, int j, double value) noexcept { a_[index(i, j)] = value; }
  void add(int i, int j, double value) noexcept { a_[index(i, j)] += value; }

  std::span<const double> upper() const noexcept { return {a_.data(), entry_count()}; }

  double trace() const noexcept;
  double frobenius_norm() const noexcept;
  bool all_finite() const noexcept;

  SymMatrix operator-() const;
  SymMatrix& operator+=(const SymMatrix& other);
  SymMatrix& operator*=(double s);
  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }

  /// Q^T A Q for an orthogonal n x n matrix Q given row-major.
  SymMatrix congruence(std::span<const double> q) const;

 private:
  std::size_t index(int i, int j) const noexcept {
    if (i > j) std::swap(i, j);
    // Row i starts after rows 0..i-1 of lengths n, n-1, ...
    return static_cast<std::size_t>(i * n_ - i * (i - 1) / 2 + (j - i));
  }

  int n_;
  std::array<double, kMaxDim*(kMaxDim + 1) / 2> a_{};
};

/// Eigenvalues of a symmetric matrix, ascending.
class Spectrum {
 public:
  Spectrum() = default;
  explicit Spectrum(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }
  std::span<const double> values() const noexcept { return values_; }
  double sum() const noexcept;

 private:
  std::vector<double> values_;
};

/// All eigenvalues by cyclic Jacobi rotations. Stops when the off-diagonal
/// Frobenius norm drops below 1e-14 * ||m||_F or after 50 sweeps.
Spectrum sym_eigenvalues(const SymMatrix& m);

using ScalarField = std::function<double(std::span<const double>)>;

/// max(1e-5, 1e-4 * |x|)
double default_fd_step(std::span<const double> x);

/// Central-difference Hessian. Mixed entries use the four-point stencil and are
/// symmetrised as (d_ij + d_ji)/2. Throws DomainError when f throws it or
/// returns a non-finite value on the stencil.
SymMatrix fd_hessian(const ScalarField& f, std::span<const double> x,
                     std::optional<double> h = std::nullopt);

/// Central-difference gradient, same step convention as fd_hessian.
std::vector<double> fd_gradient(const ScalarField& f, std::span<const double> x,
                                std::optional<double> h = std::nullopt);

double norm(std::span<const double> v) noexcept;
double dot(std::span<const double> a, std::span<const double> b) noexcept;

}  // namespace exb
