#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "exb/base_barriers.hpp"
#include "exb/numerics.hpp"
#include "exb/pucci.hpp"

namespace exb {

/// Hessian eigenvalues of an axisymmetric v(r, theta), theta measured from the
/// axis: the two eigenvalues of the (r, theta) block and n-2 copies of the
/// azimuthal curvature v_r/r + cot(theta) v_theta/r^2. On the axis the latter
/// is replaced by its limit v_thetatheta/r^2.
Spectrum axisym_hessian_spectrum(double vr, double vth, double vrr, double vrth, double vthth, double r, double theta,
                                 int n);

enum class BarrierKind { Regular, Singular };

std::string to_string(BarrierKind k);
BarrierKind barrier_kind_from_string(const std::string& s);

struct ProfileValue {
  double h;
  double dh;
  double ddh;
};

/// v(x) = |x|^alpha h(theta) on the cone theta < theta0 around `axis`.
/// h is tabulated on a uniform theta grid with h, h', h'' at each node and
/// interpolated by quintic Hermite polynomials.
class ConeBarrier {
 public:
  ConeBarrier(double theta0, int n, double alpha, std::vector<double> h, std::vector<double> dh,
              std::vector<double> ddh, double R);

  /// Tabulates an analytic profile on `nodes` + 1 points of [0, theta0].
  static ConeBarrier from_profile(double theta0, int n, double alpha,
                                  const std::function<ProfileValue(double)>& profile, double R, int nodes = 125);

  double theta0() const noexcept { return theta0_; }
  int dim() const noexcept { return n_; }
  double alpha() const noexcept { return alpha_; }
  BarrierKind kind() const noexcept { return alpha_ > 0.0 ? BarrierKind::Regular : BarrierKind::Singular; }
  double R() const noexcept { return R_; }
  double eta() const noexcept { return eta_; }
  double mu_bound() const noexcept { return mu_bound_; }
  double slack() const noexcept { return slack_; }
  void set_eta(double eta) noexcept { eta_ = eta; }
  void set_mu_bound(double mu) noexcept { mu_bound_ = mu; }
  void set_slack(double kappa) noexcept { slack_ = kappa; }

  std::span<const double> table_h() const noexcept { return h_; }
  std::span<const double> table_dh() const noexcept { return dh_; }
  std::span<const double> table_ddh() const noexcept { return ddh_; }

  ProfileValue profile(double theta) const;

  /// Spectrum of D^2 v at polar position (r, theta).
  Spectrum hessian_spectrum(double r, double theta) const;

  /// Cartesian value, gradient and Hessian at y relative to the vertex, with
  /// the cone opening along the unit vector `axis`.
  Jet eval(std::span<const double> y, std::span<const double> axis) const;
  double value(std::span<const double> y, std::span<const double> axis) const;

 private:
  double theta0_;
  int n_;
  double alpha_;
  double step_;
  std::vector<double> h_, dh_, ddh_;
  double R_;
  double eta_ = 0.0;
  double mu_bound_ = 0.0;
  double slack_ = 0.0;
};

struct ConeSampleGrid {
  int nr = 8;
  int ntheta = 400;
  double theta_band = 1e-3;  // excluded band below theta0
  double r_min_ratio = 1e-3;
};

struct ConeCertificate {
  double eta;
  double margin;  // same as eta; the sampled minimum of -M+(D^2 v) r^{2-alpha}
  std::size_t samples;
};

/// Radii are log-spaced in [r_min_ratio R, R] unless `radii` is non-empty.
ConeCertificate certify_cone_barrier(const ConeBarrier& b, const EllipticityPair& ell, const ConeSampleGrid& grid = {},
                                     std::span<const double> radii = {});

/// Shoots h'' = F(theta, h, h') with M+(D^2 v) = -kappa h r^{alpha-2}, h(0) = 1,
/// h'(0) = 0, bisects the largest |alpha| in (0, 2] keeping h > 0 on
/// [0, theta0], then backs off to 0.9 of it and certifies.
ConeBarrier build_cone_barrier(double theta0, const EllipticityPair& ell, int n, BarrierKind kind, double R = 1.0);

struct StrongBarrierCertificate {
  double mu_order;  // exponent alpha of the barrier (negative for singular)
  double C1, C2, C3, C4, C5;
  double r0;
  double K;
  std::size_t samples;
  std::string checked_at;
};

struct FamilySamples {
  int nr = 24;
  int ntheta = 64;
  int nazimuth = 4;  // used when n >= 3
  double r_min_ratio = 1e-4;
};

/// Orthogonal n x n matrix (row-major) mapping e_n to `axis`, by a Householder
/// reflection.
std::vector<double> axis_frame(std::span<const double> axis);

/// Conditions (2)-(5) for h(y, z) = v(y - z) with the cone about axes[k] at
/// points[k], sampled for 0 < |y - z| < r0 and theta <= theta_max. The drift
/// is taken in the worst case: M+(D^2 h) + K |D h|. C3 and C4 use |D h| and
/// the spectral norm of D^2 h. Throws CertificationFailure when C5 <= 0.
StrongBarrierCertificate certify_barrier_family(const ConeBarrier& b, const std::vector<std::vector<double>>& points,
                                                const std::vector<std::vector<double>>& axes, double K,
                                                const EllipticityPair& ell, double r0, double theta_max,
                                                const FamilySamples& samples = {});

/// Largest r0 for which -M+(D^2 v) - K |Dv| stays positive on the sampled
/// angles, i.e. min over theta of eta(theta) / (K g(theta)) with
/// g = |Dv| r^{1-alpha}. Infinite when K = 0.
double max_family_radius(const ConeBarrier& b, const EllipticityPair& ell, double K, double theta_max,
                         int ntheta = 400);

std::string barrier_to_json(const ConeBarrier& b);
ConeBarrier barrier_from_json(const std::string& text);

}  // namespace exb
