#include "exb/pucci.hpp"

#include <cmath>
#include <string>

#include "exb/error.hpp"

namespace exb {

EllipticityPair::EllipticityPair(double lambda_, double Lambda_) : lambda(lambda_), Lambda(Lambda_) {
  if (!std::isfinite(lambda) || !std::isfinite(Lambda) || !(lambda > 0.0) || !(lambda <= Lambda)) {
    throw InvalidInput("ellipticity needs 0 < lambda <= Lambda, got (" + std::to_string(lambda) + ", " +
                       std::to_string(Lambda) + ")");
  }
}

double pucci_from_eigenvalues(std::span<const double> ev, const EllipticityPair& ell, PucciBranch branch,
                              double scale) {
  const double cut = 1e-13 * scale;
  const double wpos = branch == PucciBranch::Plus ? ell.Lambda : ell.lambda;
  const double wneg = branch == PucciBranch::Plus ? ell.lambda : ell.Lambda;
  double pos = 0.0;
  double neg = 0.0;
  for (double e : ev) {
    if (std::abs(e) <= cut) continue;
    if (e > 0.0)
      pos += e;
    else
      neg += e;
  }
  return wpos * pos + wneg * neg;
}

double PucciOperator::operator()(const SymMatrix& m) const {
  const Spectrum s = sym_eigenvalues(m);
  return pucci_from_eigenvalues(s.values(), ell_, branch_, m.frobenius_norm());
}

double pucci_plus(const SymMatrix& m, const EllipticityPair& ell) {
  return PucciOperator(ell, PucciBranch::Plus)(m);
}

double pucci_minus(const SymMatrix& m, const EllipticityPair& ell) {
  return PucciOperator(ell, PucciBranch::Minus)(m);
}

Spectrum radial_hessian_spectrum(double du, double ddu, double r, int n) {
  if (!(r > 0.0)) throw DomainError("radial Hessian needs r > 0");
  if (n < 1 || n > kMaxDim) throw InvalidInput("dimension " + std::to_string(n) + " outside [1, 8]");
  std::vector<double> ev(static_cast<std::size_t>(n), du / r);
  ev.back() = ddu;
  return Spectrum(std::move(ev));
}

}  // namespace exb
