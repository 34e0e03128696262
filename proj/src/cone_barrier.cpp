#include "exb/cone_barrier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "exb/error.hpp"

namespace exb {

namespace {

constexpr int kShootSteps = 2000;
// Table keeps every kTableStride-th step: second derivatives rebuilt from values lose
// about eps/d^2, so a coarser table is more accurate than the integration grid.
constexpr int kTableStride = 16;
static_assert(kShootSteps % kTableStride == 0);

std::array<double, 2> eig2(double a, double b, double c) {
  const double m = 0.5 * (a + c);
  const double d = std::hypot(0.5 * (a - c), b);
  return {m - d, m + d};
}

// Entries of D^2 v divided by r^{alpha-2} for v = r^alpha h(theta).
struct UnitHessian {
  double rr, rt, tt, az;
};

UnitHessian unit_hessian(double alpha, double theta, const ProfileValue& p) {
  const double s = std::sin(theta);
  const double az = std::abs(s) < 1e-12 ? alpha * p.h + p.ddh : alpha * p.h + std::cos(theta) / s * p.dh;
  return {alpha * (alpha - 1.0) * p.h, (alpha - 1.0) * p.dh, p.ddh + alpha * p.h, az};
}

// M+ over the unit spectrum, no zero threshold (used while shooting).
double mplus_unit(const UnitHessian& u, int n, const EllipticityPair& ell) {
  auto w = [&](double e) { return e > 0.0 ? ell.Lambda * e : ell.lambda * e; };
  const auto ev = eig2(u.rr, u.rt, u.tt);
  return w(ev[0]) + w(ev[1]) + (n - 2) * w(u.az);
}

// h'' making M+ (D^2 v) = -kappa h r^{alpha-2}. The left side is increasing in
// h'' with slope at least lambda, so the root lies within |g(0)|/lambda of 0.
double solve_ddh(double alpha, double theta, double h, double dh, int n, const EllipticityPair& ell, double kappa) {
  auto g = [&](double x) { return mplus_unit(unit_hessian(alpha, theta, {h, dh, x}), n, ell) + kappa * h; };
  const double g0 = g(0.0);
  if (g0 == 0.0) return 0.0;
  double lo = g0 > 0.0 ? -g0 / ell.lambda * 1.0001 : 0.0;
  double hi = g0 > 0.0 ? 0.0 : -g0 / ell.lambda * 1.0001;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (g(mid) > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

struct Shot {
  bool positive;
  double min_h;
  std::vector<double> h, dh, ddh;
};

Shot shoot(double alpha, double theta0, int n, const EllipticityPair& ell, double kappa) {
  const double d = theta0 / kShootSteps;
  Shot s{true, 1.0, {}, {}, {}};
  s.h.reserve(kShootSteps / kTableStride + 1);
  s.dh.reserve(kShootSteps / kTableStride + 1);
  s.ddh.reserve(kShootSteps / kTableStride + 1);
  double h = 1.0;
  double dh = 0.0;
  auto f = [&](double th, double y0, double y1) { return solve_ddh(alpha, th, y0, y1, n, ell, kappa); };
  for (int k = 0; k <= kShootSteps; ++k) {
    const double th = k * d;
    const double ddh = f(th, h, dh);
    if (k % kTableStride == 0) {
      s.h.push_back(h);
      s.dh.push_back(dh);
      s.ddh.push_back(ddh);
    }
    s.min_h = std::min(s.min_h, h);
    if (!(h > 0.0) || !std::isfinite(h)) {
      s.positive = false;
      return s;
    }
    if (k == kShootSteps) break;
    const double k1h = dh, k1d = ddh;
    const double k2h = dh + 0.5 * d * k1d, k2d = f(th + 0.5 * d, h + 0.5 * d * k1h, dh + 0.5 * d * k1d);
    const double k3h = dh + 0.5 * d * k2d, k3d = f(th + 0.5 * d, h + 0.5 * d * k2h, dh + 0.5 * d * k2d);
    const double k4h = dh + d * k3d, k4d = f(th + d, h + d * k3h, dh + d * k3d);
    h += d / 6.0 * (k1h + 2.0 * k2h + 2.0 * k3h + k4h);
    dh += d / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
  }
  return s;
}

void check_aperture(double theta0) {
  if (!(theta0 > 0.0 && theta0 < std::numbers::pi)) throw ParameterError("cone aperture must lie in (0, pi)");
}

double unit_scale(const UnitHessian& u) {
  return std::abs(u.rr) + 2.0 * std::abs(u.rt) + std::abs(u.tt) + std::abs(u.az);
}

}  // namespace

Spectrum axisym_hessian_spectrum(double vr, double vth, double vrr, double vrth, double vthth, double r, double theta,
                                 int n) {
  if (!(r > 0.0)) throw DomainError("axisymmetric Hessian needs r > 0");
  if (n < 2 || n > kMaxDim) throw InvalidInput("axisymmetric Hessian needs 2 <= n <= 8");
  const double hrr = vrr;
  const double hrt = vrth / r - vth / (r * r);
  const double htt = vthth / (r * r) + vr / r;
  const double s = std::sin(theta);
  const double az = std::abs(s) < 1e-12 ? vr / r + vthth / (r * r) : vr / r + std::cos(theta) / s * vth / (r * r);
  const auto ev = eig2(hrr, hrt, htt);
  std::vector<double> out{ev[0], ev[1]};
  for (int k = 0; k < n - 2; ++k) out.push_back(az);
  return Spectrum(std::move(out));
}

std::string to_string(BarrierKind k) { return k == BarrierKind::Regular ? "regular" : "singular"; }

BarrierKind barrier_kind_from_string(const std::string& s) {
  if (s == "regular") return BarrierKind::Regular;
  if (s == "singular") return BarrierKind::Singular;
  throw InvalidInput("barrier kind must be regular or singular, got '" + s + "'");
}

ConeBarrier::ConeBarrier(double theta0, int n, double alpha, std::vector<double> h, std::vector<double> dh,
                         std::vector<double> ddh, double R)
    : theta0_(theta0), n_(n), alpha_(alpha), h_(std::move(h)), dh_(std::move(dh)), ddh_(std::move(ddh)), R_(R) {
  check_aperture(theta0);
  if (n < 2 || n > kMaxDim) throw ParameterError("cone barrier dimension must lie in [2, 8]");
  if (!(alpha != 0.0) || !std::isfinite(alpha)) throw ParameterError("cone barrier order must be nonzero");
  if (h_.size() < 2 || dh_.size() != h_.size() || ddh_.size() != h_.size()) {
    throw InvalidInput("profile table needs matching h, h', h'' columns with at least two nodes");
  }
  if (!(R > 0.0)) throw ParameterError("cone barrier radius must be positive");
  step_ = theta0_ / static_cast<double>(h_.size() - 1);
}

ConeBarrier ConeBarrier::from_profile(double theta0, int n, double alpha,
                                      const std::function<ProfileValue(double)>& profile, double R, int nodes) {
  check_aperture(theta0);
  std::vector<double> h, dh, ddh;
  for (int k = 0; k <= nodes; ++k) {
    const ProfileValue p = profile(theta0 * k / nodes);
    h.push_back(p.h);
    dh.push_back(p.dh);
    ddh.push_back(p.ddh);
  }
  return ConeBarrier(theta0, n, alpha, std::move(h), std::move(dh), std::move(ddh), R);
}

ProfileValue ConeBarrier::profile(double theta) const {
  if (!(theta >= -1e-12 && theta <= theta0_ * (1.0 + 1e-12))) {
    throw DomainError("angle outside the barrier's cone");
  }
  const auto last = h_.size() - 1;
  double pos = std::clamp(theta, 0.0, theta0_) / step_;
  auto k = static_cast<std::size_t>(pos);
  if (k >= last) k = last - 1;
  const double s = pos - static_cast<double>(k);
  const double d = step_;
  const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;

  const double b0 = 1 - 10 * s3 + 15 * s4 - 6 * s5;
  const double b1 = s - 6 * s3 + 8 * s4 - 3 * s5;
  const double b2 = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5);
  const double b3 = 1.0 - b0;
  const double b4 = -4 * s3 + 7 * s4 - 3 * s5;
  const double b5 = 0.5 * (s3 - 2 * s4 + s5);

  const double d0 = -30 * s2 + 60 * s3 - 30 * s4;
  const double d1 = 1 - 18 * s2 + 32 * s3 - 15 * s4;
  const double d2 = 0.5 * (2 * s - 9 * s2 + 12 * s3 - 5 * s4);
  const double d4 = -12 * s2 + 28 * s3 - 15 * s4;
  const double d5 = 0.5 * (3 * s2 - 8 * s3 + 5 * s4);

  const double e0 = -60 * s + 180 * s2 - 120 * s3;
  const double e1 = -36 * s + 96 * s2 - 60 * s3;
  const double e2 = 0.5 * (2 - 18 * s + 36 * s2 - 20 * s3);
  const double e4 = -24 * s + 84 * s2 - 60 * s3;
  const double e5 = 0.5 * (6 * s - 24 * s2 + 20 * s3);

  const double h0 = h_[k], h1 = h_[k + 1];
  const double p0 = d * dh_[k], p1 = d * dh_[k + 1];
  const double q0 = d * d * ddh_[k], q1 = d * d * ddh_[k + 1];

  return {h0 * b0 + p0 * b1 + q0 * b2 + h1 * b3 + p1 * b4 + q1 * b5,
          (h0 * d0 + p0 * d1 + q0 * d2 - h1 * d0 + p1 * d4 + q1 * d5) / d,
          (h0 * e0 + p0 * e1 + q0 * e2 - h1 * e0 + p1 * e4 + q1 * e5) / (d * d)};
}

Spectrum ConeBarrier::hessian_spectrum(double r, double theta) const {
  const ProfileValue p = profile(theta);
  const double ra = std::pow(r, alpha_);
  return axisym_hessian_spectrum(alpha_ * ra / r * p.h, ra * p.dh, alpha_ * (alpha_ - 1.0) * ra / (r * r) * p.h,
                                 alpha_ * ra / r * p.dh, ra * p.ddh, r, theta, n_);
}

namespace {

struct Polar {
  double r;
  double theta;
  std::vector<double> er;
  std::vector<double> et;  // empty on the axis
};

Polar to_polar(std::span<const double> y, std::span<const double> axis) {
  if (y.size() != axis.size()) throw InvalidInput("point and axis dimensions differ");
  Polar p;
  p.r = norm(y);
  if (!(p.r > 0.0)) throw DomainError("cone barrier evaluated at its vertex");
  const double along = dot(y, axis);
  std::vector<double> perp(y.begin(), y.end());
  for (std::size_t i = 0; i < perp.size(); ++i) perp[i] -= along * axis[i];
  const double pn = norm(perp);
  p.theta = std::atan2(pn, along);
  p.er.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) p.er[i] = y[i] / p.r;
  if (pn > 1e-12 * p.r) {
    const double c = std::cos(p.theta), s = std::sin(p.theta);
    p.et.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) p.et[i] = -s * axis[i] + c * perp[i] / pn;
  }
  return p;
}

}  // namespace

double ConeBarrier::value(std::span<const double> y, std::span<const double> axis) const {
  const Polar p = to_polar(y, axis);
  return std::pow(p.r, alpha_) * profile(p.theta).h;
}

Jet ConeBarrier::eval(std::span<const double> y, std::span<const double> axis) const {
  const Polar p = to_polar(y, axis);
  const ProfileValue pv = profile(p.theta);
  const auto n = y.size();
  const double ra2 = std::pow(p.r, alpha_ - 2.0);
  const UnitHessian u = unit_hessian(alpha_, p.theta, pv);

  Jet j;
  j.value = std::pow(p.r, alpha_) * pv.h;
  const double vr = alpha_ * ra2 * p.r * pv.h;
  const double vt_over_r = ra2 * p.r * pv.dh;
  j.gradient.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    j.gradient[i] = vr * p.er[i] + (p.et.empty() ? 0.0 : vt_over_r * p.et[i]);
  }
  SymMatrix H(static_cast<int>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i; k < n; ++k) {
      const double rr = p.er[i] * p.er[k];
      double v = u.rr * rr;
      double proj = (i == k ? 1.0 : 0.0) - rr;
      if (!p.et.empty()) {
        const double tt = p.et[i] * p.et[k];
        v += u.rt * (p.er[i] * p.et[k] + p.et[i] * p.er[k]) + u.tt * tt;
        proj -= tt;
      }
      v += u.az * proj;
      H.set(static_cast<int>(i), static_cast<int>(k), ra2 * v);
    }
  }
  j.hessian = H;
  j.dt = 0.0;
  return j;
}

ConeCertificate certify_cone_barrier(const ConeBarrier& b, const EllipticityPair& ell, const ConeSampleGrid& grid,
                                     std::span<const double> radii) {
  std::vector<double> rs(radii.begin(), radii.end());
  if (rs.empty()) {
    for (int k = 0; k < grid.nr; ++k) {
      const double f = grid.nr == 1 ? 1.0 : static_cast<double>(k) / (grid.nr - 1);
      rs.push_back(b.R() * std::pow(grid.r_min_ratio, 1.0 - f));
    }
  }
  const double theta_hi = b.theta0() - grid.theta_band;
  if (!(theta_hi > 0.0) || grid.ntheta < 2) throw InvalidInput("cone sample grid leaves no angles");
  double eta = std::numeric_limits<double>::infinity();
  double scale = 0.0;
  double wr = 0.0, wt = 0.0;
  std::size_t count = 0;
  for (double r : rs) {
    for (int j = 0; j < grid.ntheta; ++j) {
      const double th = theta_hi * j / (grid.ntheta - 1);
      const ProfileValue pv = b.profile(th);
      const Spectrum s = b.hessian_spectrum(r, th);
      const double ra2 = std::pow(r, b.alpha() - 2.0);
      const double sc = unit_scale(unit_hessian(b.alpha(), th, pv)) + std::abs(pv.h) + std::abs(pv.dh);
      const double m = pucci_from_eigenvalues(s.values(), ell, PucciBranch::Plus, sc * ra2);
      const double e = -m / ra2;
      if (e < eta) {
        eta = e;
        wr = r;
        wt = th;
      }
      scale = std::max(scale, sc);
      ++count;
    }
  }
  // Positive beyond rounding: relative to the size of the unit Hessian entries.
  if (!(eta > 1e-9 * scale)) {
    throw CertificationFailure("cone barrier: M+(D^2 v) is not bounded away from zero", {wr, wt}, -eta, 0.0);
  }
  return {eta, eta, count};
}

ConeBarrier build_cone_barrier(double theta0, const EllipticityPair& ell, int n, BarrierKind kind, double R) {
  check_aperture(theta0);
  if (n < 2 || n > kMaxDim) throw ParameterError("cone barrier dimension must lie in [2, 8]");
  if (!(R > 0.0)) throw ParameterError("cone barrier radius must be positive");
  const double kappa = 0.05 * ell.lambda;
  const double sign = kind == BarrierKind::Regular ? 1.0 : -1.0;
  std::vector<ConstructionFailure::Probe> sweep;

  auto positive = [&](double a) {
    const Shot s = shoot(sign * a, theta0, n, ell, kappa);
    sweep.push_back({sign * a, s.min_h});
    return s.positive;
  };

  double amax = 2.0;
  if (!positive(2.0)) {
    double lo = 0.0, hi = 2.0;
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (positive(mid))
        lo = mid;
      else
        hi = mid;
    }
    amax = lo;
  }
  if (!(amax > 1e-6)) throw ConstructionFailure("no order |alpha| in (0, 2] keeps the profile positive", sweep);

  double a = 0.9 * amax;
  for (int attempt = 0; attempt < 20; ++attempt, a *= 0.9) {
    Shot s = shoot(sign * a, theta0, n, ell, kappa);
    if (!s.positive) continue;
    ConeBarrier b(theta0, n, sign * a, std::move(s.h), std::move(s.dh), std::move(s.ddh), R);
    try {
      const ConeCertificate c = certify_cone_barrier(b, ell);
      b.set_eta(c.eta);
      b.set_mu_bound(a / 0.9);
      b.set_slack(kappa);
      return b;
    } catch (const CertificationFailure& f) {
      sweep.push_back({sign * a, -f.lhs()});
    }
  }
  throw ConstructionFailure("no order certified after backing off from the positivity limit", sweep);
}

std::vector<double> axis_frame(std::span<const double> axis) {
  const auto n = axis.size();
  if (n < 1 || std::abs(norm(axis) - 1.0) > 1e-12) throw InvalidInput("axis must be a unit vector");
  std::vector<double> q(n * n, 0.0);
  std::vector<double> v(axis.begin(), axis.end());
  v[n - 1] -= 1.0;
  const double vv = dot(v, v);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      q[i * n + k] = (i == k ? 1.0 : 0.0) - (vv > 1e-30 ? 2.0 * v[i] * v[k] / vv : 0.0);
    }
  }
  return q;
}

StrongBarrierCertificate certify_barrier_family(const ConeBarrier& b, const std::vector<std::vector<double>>& points,
                                                const std::vector<std::vector<double>>& axes, double K,
                                                const EllipticityPair& ell, double r0, double theta_max,
                                                const FamilySamples& samples) {
  if (points.size() != axes.size() || points.empty()) throw InvalidInput("each boundary point needs one cone axis");
  if (!(r0 > 0.0) || !(K >= 0.0)) throw ParameterError("family radius must be positive and K nonnegative");
  if (!(theta_max > 0.0 && theta_max <= b.theta0())) throw ParameterError("theta_max must lie in (0, theta0]");
  const int n = b.dim();
  const double alpha = b.alpha();
  const PucciOperator mplus(ell, PucciBranch::Plus);

  StrongBarrierCertificate c{alpha, std::numeric_limits<double>::infinity(), 0.0, 0.0, 0.0,
                             std::numeric_limits<double>::infinity(), r0, K, 0, ""};
  std::vector<double> wit;

  // Local directions perpendicular to e_n.
  std::vector<std::vector<double>> perps;
  if (n == 2) {
    perps = {{1.0, 0.0}, {-1.0, 0.0}};
  } else {
    for (const auto& d : sample_directions(n - 1, samples.nazimuth, 77)) {
      std::vector<double> p(d);
      p.push_back(0.0);
      perps.push_back(std::move(p));
    }
  }

  std::vector<double> yl(static_cast<std::size_t>(n));
  std::vector<double> y(static_cast<std::size_t>(n));
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const auto& a = axes[pi];
    if (static_cast<int>(a.size()) != n || static_cast<int>(points[pi].size()) != n) {
      throw InvalidInput("boundary point or axis has the wrong dimension");
    }
    const auto q = axis_frame(a);
    for (int ir = 0; ir < samples.nr; ++ir) {
      const double f = samples.nr == 1 ? 1.0 : static_cast<double>(ir) / (samples.nr - 1);
      const double r = r0 * (1.0 - 1e-9) * std::pow(samples.r_min_ratio, 1.0 - f);
      for (int it = 0; it < samples.ntheta; ++it) {
        const double th = theta_max * it / (samples.ntheta - 1);
        for (const auto& u : perps) {
          for (int i = 0; i < n; ++i) {
            yl[static_cast<std::size_t>(i)] =
                r * (std::sin(th) * u[static_cast<std::size_t>(i)] + (i == n - 1 ? std::cos(th) : 0.0));
          }
          for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += q[static_cast<std::size_t>(i * n + k)] * yl[static_cast<std::size_t>(k)];
            y[static_cast<std::size_t>(i)] = s;
          }
          const Jet j = b.eval(y, a);
          const double g = norm(j.gradient);
          const Spectrum sp = sym_eigenvalues(j.hessian);
          const double spec_norm = std::max(std::abs(sp[0]), std::abs(sp[sp.size() - 1]));
          const double m = mplus(j.hessian);
          c.C1 = std::min(c.C1, j.value * std::pow(r, -alpha));
          c.C2 = std::max(c.C2, j.value * std::pow(r, -alpha));
          c.C3 = std::max(c.C3, g * std::pow(r, 1.0 - alpha));
          c.C4 = std::max(c.C4, spec_norm * std::pow(r, 2.0 - alpha));
          const double c5 = -(m + K * g) * std::pow(r, 2.0 - alpha);
          if (c5 < c.C5) {
            c.C5 = c5;
            wit = y;
            for (std::size_t i = 0; i < wit.size(); ++i) wit[i] += points[pi][i];
          }
          ++c.samples;
        }
      }
    }
  }
  c.checked_at = std::to_string(points.size()) + " points, " + std::to_string(samples.nr) + " radii in (0, " +
                 std::to_string(r0) + "), " + std::to_string(samples.ntheta) + " angles up to " +
                 std::to_string(theta_max);
  if (!(c.C5 > 0.0)) {
    throw CertificationFailure("barrier family: drift term overwhelms the Pucci decay; shrink r0", wit, -c.C5, 0.0);
  }
  return c;
}

double max_family_radius(const ConeBarrier& b, const EllipticityPair& ell, double K, double theta_max, int ntheta) {
  if (!(K > 0.0)) return std::numeric_limits<double>::infinity();
  const int n = b.dim();
  std::vector<double> axis(static_cast<std::size_t>(n), 0.0);
  axis.back() = 1.0;
  const PucciOperator mplus(ell, PucciBranch::Plus);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> y(static_cast<std::size_t>(n), 0.0);
  for (int it = 0; it < ntheta; ++it) {
    const double th = theta_max * it / (ntheta - 1);
    y[0] = std::sin(th);
    y.back() = std::cos(th);
    const Jet j = b.eval(y, axis);
    const double e = -mplus(j.hessian);
    const double g = norm(j.gradient);
    if (g > 0.0) best = std::min(best, e / (K * g));
  }
  return best;
}

std::string barrier_to_json(const ConeBarrier& b) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["theta0"] = b.theta0();
  j["n"] = b.dim();
  j["alpha"] = b.alpha();
  j["kind"] = to_string(b.kind());
  j["eta"] = b.eta();
  j["mu_bound"] = b.mu_bound();
  j["slack"] = b.slack();
  j["R"] = b.R();
  j["h"] = std::vector<double>(b.table_h().begin(), b.table_h().end());
  j["dh"] = std::vector<double>(b.table_dh().begin(), b.table_dh().end());
  j["ddh"] = std::vector<double>(b.table_ddh().begin(), b.table_ddh().end());
  return j.dump(1);
}

ConeBarrier barrier_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("barrier document is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("schema_version").get<int>() != 1) throw ConfigError("unsupported barrier schema_version");
    ConeBarrier b(j.at("theta0").get<double>(), j.at("n").get<int>(), j.at("alpha").get<double>(),
                  j.at("h").get<std::vector<double>>(), j.at("dh").get<std::vector<double>>(),
                  j.at("ddh").get<std::vector<double>>(), j.at("R").get<double>());
    b.set_eta(j.at("eta").get<double>());
    b.set_mu_bound(j.at("mu_bound").get<double>());
    b.set_slack(j.value("slack", 0.0));
    if (j.contains("kind") && barrier_kind_from_string(j["kind"].get<std::string>()) != b.kind()) {
      throw ConfigError("barrier kind disagrees with the sign of alpha");
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("barrier document missing or mistyped field: ") + e.what());
  }
}

}  // namespace exb
