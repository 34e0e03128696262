#pragma once

#include <span>

#include "exb/numerics.hpp"

namespace exb {

/// Ellipticity constants 0 < lambda <= Lambda.
struct EllipticityPair {
  double lambda;
  double Lambda;

  EllipticityPair(double lambda_, double Lambda_);
  double ratio() const noexcept { return lambda / Lambda; }
};

enum class PucciBranch { Plus, Minus };

/// Weighted sum over sign classes of a spectrum. Eigenvalues below
/// 1e-13 * scale in magnitude count as zero.
double pucci_from_eigenvalues(std::span<const double> ev, const EllipticityPair& ell, PucciBranch branch,
                              double scale);

double pucci_plus(const SymMatrix& m, const EllipticityPair& ell);
double pucci_minus(const SymMatrix& m, const EllipticityPair& ell);

class PucciOperator {
 public:
  PucciOperator(EllipticityPair ell, PucciBranch branch) : ell_(ell), branch_(branch) {}

  double operator()(const SymMatrix& m) const;
  double operator()(std::span<const double> ev, double scale) const {
    return pucci_from_eigenvalues(ev, ell_, branch_, scale);
  }

  const EllipticityPair& ellipticity() const noexcept { return ell_; }
  PucciBranch branch() const noexcept { return branch_; }

 private:
  EllipticityPair ell_;
  PucciBranch branch_;
};

/// Eigenvalues of D^2 u for u(x) = g(|x|): du/r repeated n-1 times and ddu.
Spectrum radial_hessian_spectrum(double du, double ddu, double r, int n);

}  // namespace exb
