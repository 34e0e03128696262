#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exb/numerics.hpp"
#include "exb/pucci.hpp"

namespace exb {

/// Nonnegative envelope t -> a (constant) or t -> a * t^p (power law).
struct Envelope {
  enum class Kind { Constant, Power };

  Kind kind = Kind::Constant;
  double a = 0.0;
  double p = 0.0;

  static Envelope zero() { return {}; }
  static Envelope constant(double a) { return {Kind::Constant, a, 0.0}; }
  static Envelope power(double a, double p) { return {Kind::Power, a, p}; }

  double operator()(double t) const;
  /// Exponent of t in the envelope (0 for constants).
  double exponent() const noexcept { return kind == Kind::Power ? p : 0.0; }
  bool is_zero() const noexcept { return a == 0.0; }
};

/// Bounds on the lower-order coefficients: |b| <= b0(t), |c| <= c0(t), c <= 0,
/// and the uniform drift bound K used by the lateral barriers.
struct CoefficientBounds {
  double beta = 0.5;
  Envelope b0;
  Envelope c0;
  double K = 0.0;
  bool c_nonpositive = true;

  /// Checks beta in (0,1), nonnegativity, c <= 0, and that t^{1/2} b0(t) and
  /// t^{1-beta} c0(t) decay along t = T 2^{-k}, k = 1..20. Throws ParameterError.
  void validate(double T) const;
};

struct BaseBarrierParams {
  double alpha;
  double sigma;
  int n;

  /// Throws ParameterError unless 0 < 2 alpha < 4 n lambda sigma < lambda/Lambda.
  void validate(const EllipticityPair& ell) const;
};

/// Value and derivatives of a barrier at one space-time point.
struct Jet {
  double value = 0.0;
  std::vector<double> gradient;
  SymMatrix hessian{1};
  double dt = 0.0;
};

/// psi(x,t) = t^{-alpha} exp(-sigma |x|^2 / t) with closed-form derivatives.
Jet eval_psi(std::span<const double> x, double t, const BaseBarrierParams& p);

/// Derivatives of psi divided by psi. Finite even where psi underflows.
struct PsiUnit {
  double grad_norm;   // |D psi| / psi
  SymMatrix hessian;  // D^2 psi / psi
  double dt;          // psi_t / psi
};
PsiUnit psi_unit(std::span<const double> x, double t, const BaseBarrierParams& p);

struct PhiJet {
  Jet jet;
  /// |phi_t| <= t^{-beta} + t^{beta-1} |x|^2 at the queried point.
  bool dt_bound_holds;
};

/// phi(x,t) = t^{1-beta} + (1 + t^beta) |x|^2.
PhiJet eval_phi(std::span<const double> x, double t, double beta);

/// min((2 sigma lambda n - alpha)/2, (1 + 8 sigma Lambda (n/2 - 1)) sigma / 2)
double psi_gamma(const BaseBarrierParams& p, const EllipticityPair& ell);
/// min(beta/2, (1-beta)/2)
double phi_gamma(double beta);

/// Largest t <= T_cap such that the smallness conditions on the coefficients
/// hold at every s of a 64-point log grid in (0, t].
double psi_horizon(const BaseBarrierParams& p, const CoefficientBounds& cb, const EllipticityPair& ell,
                   double T_cap);
double phi_horizon(const CoefficientBounds& cb, const EllipticityPair& ell, int n, double T_cap);

/// Tensor sample grid: nt log-spaced times in (t_floor * T_star, T_star),
/// nr radii in [0, radius], ndir unit directions.
struct SampleGrid {
  int nt = 40;
  int nr = 40;
  int ndir = 8;
  double radius = 1.0;
  double t_floor = 1e-6;
  std::uint64_t seed = 12345;

  std::size_t size() const noexcept { return static_cast<std::size_t>(nt) * nr * ndir; }
};

/// Deterministic unit directions: equally spaced angles for n = 2, the two
/// signs for n = 1, axes plus seeded Gaussian directions otherwise.
std::vector<std::vector<double>> sample_directions(int n, int count, std::uint64_t seed);

struct BarrierCertificate {
  double gamma = 0.0;
  double T_star = 0.0;
  /// Minimum over samples of (rhs - lhs) / |rhs|.
  double margin = 0.0;
  std::size_t samples = 0;
};

/// Verifies -psi_t + M+(D^2 psi) + b0 |D psi| + c0 psi <= -gamma1 (t + |x|^2) t^{-2} psi
/// on the grid for t < T1. Throws ParameterError or CertificationFailure.
BarrierCertificate certify_psi(const BaseBarrierParams& p, const CoefficientBounds& cb,
                               const EllipticityPair& ell, double T, const SampleGrid& grid = {});

/// Same for phi against -gamma2 (t^{-beta} + t^{beta-1} |x|^2).
BarrierCertificate certify_phi(const CoefficientBounds& cb, const EllipticityPair& ell, int n, double T,
                               const SampleGrid& grid = {});

struct EstimateCheck {
  std::string name;
  std::string literal;  // the bound as printed in the source
  std::string checked;  // the bound actually verified
  double worst_ratio;   // sup of lhs / (bound without its constant)
  double constant;      // constant the bound allows
  bool holds;
};

struct PsiEstimateReport {
  double gamma;
  std::vector<EstimateCheck> checks;
  std::vector<std::vector<double>> violations;  // (x..., t)
  bool all_hold() const noexcept;
};

/// Derivative estimates for psi: gradient, Hessian entries and time
/// derivative, each against gamma1^{-1} times its weight.
PsiEstimateReport check_psi_estimates(const BaseBarrierParams& p, const EllipticityPair& ell, double T,
                                      const SampleGrid& grid = {});

}  // namespace exb
