#include "exb/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "exb/error.hpp"

namespace exb {

namespace {

void check_dim(int n) {
  if (n < 1 || n > kMaxDim) {
    throw InvalidInput("matrix dimension " + std::to_string(n) + " outside [1, 8]");
  }
}

}  // namespace

SymMatrix::SymMatrix(int n) : n_(n) { check_dim(n); }

SymMatrix SymMatrix::identity(int n) {
  SymMatrix m(n);
  for (int i = 0; i < n; ++i) m.set(i, i, 1.0);
  return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> d) {
  SymMatrix m(static_cast<int>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) m.set(static_cast<int>(i), static_cast<int>(i), d[i]);
  return m;
}

SymMatrix SymMatrix::from_upper(int n, std::span<const double> upper) {
  SymMatrix m(n);
  if (upper.size() != m.entry_count()) {
    throw InvalidInput("expected " + std::to_string(m.entry_count()) + " upper-triangle entries, got " +
                       std::to_string(upper.size()));
  }
  std::copy(upper.begin(), upper.end(), m.a_.begin());
  if (!m.all_finite()) throw InvalidInput("non-finite matrix entry");
  return m;
}

SymMatrix SymMatrix::from_full(int n, std::span<const double> rows) {
  SymMatrix m(n);
  if (rows.size() != static_cast<std::size_t>(n * n)) {
    throw InvalidInput("expected " + std::to_string(n * n) + " entries for a full matrix");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double upper = rows[static_cast<std::size_t>(i * n + j)];
      const double lower = rows[static_cast<std::size_t>(j * n + i)];
      if (!std::isfinite(upper) || !std::isfinite(lower)) throw InvalidInput("non-finite matrix entry");
      const double scale = std::max({1.0, std::abs(upper), std::abs(lower)});
      if (std::abs(upper - lower) > 1e-12 * scale) throw InvalidInput("matrix is not symmetric");
      m.set(i, j, 0.5 * (upper + lower));
    }
  }
  return m;
}

SymMatrix SymMatrix::outer(std::span<const double> v, double a) {
  SymMatrix m(static_cast<int>(v.size()));
  for (int i = 0; i < m.n_; ++i)
    for (int j = i; j < m.n_; ++j) m.set(i, j, a * v[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(j)]);
  return m;
}

double SymMatrix::trace() const noexcept {
  double t = 0.0;
  for (int i = 0; i < n_; ++i) t += (*this)(i, i);
  return t;
}

double SymMatrix::frobenius_norm() const noexcept {
  double s = 0.0;
  for (int i = 0; i < n_; ++i) {
    for (int j = i; j < n_; ++j) {
      const double v = (*this)(i, j);
      s += (i == j ? 1.0 : 2.0) * v * v;
    }
  }
  return std::sqrt(s);
}

bool SymMatrix::all_finite() const noexcept {
  return std::all_of(a_.begin(), a_.begin() + static_cast<std::ptrdiff_t>(entry_count()),
                     [](double v) { return std::isfinite(v); });
}

SymMatrix SymMatrix::operator-() const {
  SymMatrix m(*this);
  for (std::size_t k = 0; k < entry_count(); ++k) m.a_[k] = -m.a_[k];
  return m;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& other) {
  if (other.n_ != n_) throw InvalidInput("dimension mismatch in SymMatrix addition");
  for (std::size_t k = 0; k < entry_count(); ++k) a_[k] += other.a_[k];
  return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
  for (std::size_t k = 0; k < entry_count(); ++k) a_[k] *= s;
  return *this;
}

SymMatrix SymMatrix::congruence(std::span<const double> q) const {
  const auto n = static_cast<std::size_t>(n_);
  if (q.size() != n * n) throw InvalidInput("congruence needs an n x n matrix");
  // (Q^T A Q)_ij = sum_kl Q_ki A_kl Q_lj
  std::array<double, kMaxDim * kMaxDim> aq{};
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < n; ++l) s += (*this)(static_cast<int>(k), static_cast<int>(l)) * q[l * n + j];
      aq[k * n + j] = s;
    }
  SymMatrix out(n_);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += q[k * n + i] * aq[k * n + j];
      out.set(static_cast<int>(i), static_cast<int>(j), s);
    }
  return out;
}

Spectrum::Spectrum(std::vector<double> values) : values_(std::move(values)) {
  std::sort(values_.begin(), values_.end());
}

double Spectrum::sum() const noexcept {
  double s = 0.0;
  for (double v : values_) s += v;
  return s;
}

Spectrum sym_eigenvalues(const SymMatrix& m) {
  if (!m.all_finite()) throw InvalidInput("non-finite matrix entry");
  const int n = m.dim();
  std::array<double, kMaxDim * kMaxDim> a{};
  auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i * n + j)]; };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) at(i, j) = m(i, j);

  const double tol = 1e-14 * m.frobenius_norm();
  auto off_norm = [&] {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s += 2.0 * at(i, j) * at(i, j);
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 50 && off_norm() > tol; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(k, p);
          const double akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(p, k);
          const double aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
        at(p, q) = 0.0;
        at(q, p) = 0.0;
      }
    }
  }

  std::vector<double> ev(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = at(i, i);
  return Spectrum(std::move(ev));
}

double default_fd_step(std::span<const double> x) { return std::max(1e-5, 1e-4 * norm(x)); }

namespace {

double eval_checked(const ScalarField& f, std::span<const double> x) {
  const double v = f(x);
  if (!std::isfinite(v)) throw DomainError("function not finite on the finite-difference stencil");
  return v;
}

}  // namespace

SymMatrix fd_hessian(const ScalarField& f, std::span<const double> x, std::optional<double> h_opt) {
  const double h = h_opt.value_or(default_fd_step(x));
  if (!(h > 0.0)) throw DomainError("finite-difference step must be positive");
  const int n = static_cast<int>(x.size());
  std::vector<double> p(x.begin(), x.end());
  const double f0 = eval_checked(f, p);
  SymMatrix hess(n);

  auto shifted = [&](int i, double di, int j, double dj) {
    p.assign(x.begin(), x.end());
    p[static_cast<std::size_t>(i)] += di;
    p[static_cast<std::size_t>(j)] += dj;
    return eval_checked(f, p);
  };

  for (int i = 0; i < n; ++i) {
    const double fp = shifted(i, h, i, 0.0);
    const double fm = shifted(i, -h, i, 0.0);
    hess.set(i, i, (fp - 2.0 * f0 + fm) / (h * h));
    for (int j = i + 1; j < n; ++j) {
      const double fpp = shifted(i, h, j, h);
      const double fpm = shifted(i, h, j, -h);
      const double fmp = shifted(i, -h, j, h);
      const double fmm = shifted(i, -h, j, -h);
      const double dij = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
      const double dji = (fpp - fmp - fpm + fmm) / (4.0 * h * h);
      hess.set(i, j, 0.5 * (dij + dji));
    }
  }
  return hess;
}

std::vector<double> fd_gradient(const ScalarField& f, std::span<const double> x, std::optional<double> h_opt) {
  const double h = h_opt.value_or(default_fd_step(x));
  if (!(h > 0.0)) throw DomainError("finite-difference step must be positive");
  std::vector<double> g(x.size());
  std::vector<double> p(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    p[i] = x[i] + h;
    const double fp = eval_checked(f, p);
    p[i] = x[i] - h;
    const double fm = eval_checked(f, p);
    p[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double norm(std::span<const double> v) noexcept { return std::sqrt(dot(v, v)); }

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace exb
