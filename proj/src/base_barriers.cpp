#include "exb/base_barriers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "exb/error.hpp"

namespace exb {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double sq_norm(std::span<const double> x) { return dot(x, x); }

void check_time(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("barrier evaluated at t = " + fmt(t) + ", needs t > 0");
}

// Largest t in (0, T_cap] with holds(s) for all s on a 64-point log grid of (0, t].
double horizon(const std::function<bool(double)>& holds, double T_cap) {
  auto holds_below = [&](double t) {
    for (int j = 0; j < 64; ++j) {
      const double s = t * std::exp2(-40.0 * j / 63.0);
      if (!holds(s)) return false;
    }
    return true;
  };
  if (holds_below(T_cap)) return T_cap;
  double hi = T_cap;
  double lo = T_cap;
  int k = 0;
  while (!holds_below(lo)) {
    hi = lo;
    lo *= 0.5;
    if (++k > 200) throw ParameterError("coefficient smallness conditions fail for every t > 0");
  }
  while (hi - lo > 1e-9 * lo) {
    const double mid = 0.5 * (lo + hi);
    if (holds_below(mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

std::vector<double> log_times(double T_star, const SampleGrid& g) {
  std::vector<double> ts(static_cast<std::size_t>(g.nt));
  const double lo = g.t_floor * T_star;
  const double hi = T_star * (1.0 - 1e-9);
  for (int k = 0; k < g.nt; ++k) {
    const double f = g.nt == 1 ? 1.0 : static_cast<double>(k) / (g.nt - 1);
    ts[static_cast<std::size_t>(k)] = lo * std::pow(hi / lo, f);
  }
  return ts;
}

std::vector<double> radii(const SampleGrid& g) {
  std::vector<double> rs(static_cast<std::size_t>(g.nr));
  for (int j = 0; j < g.nr; ++j) rs[static_cast<std::size_t>(j)] = g.nr == 1 ? 0.0 : g.radius * j / (g.nr - 1);
  return rs;
}

void check_grid(const SampleGrid& g) {
  if (g.nt < 1 || g.nr < 1 || g.ndir < 1 || !(g.radius >= 0.0) || !(g.t_floor > 0.0 && g.t_floor < 1.0)) {
    throw InvalidInput("malformed sample grid");
  }
}

}  // namespace

double Envelope::operator()(double t) const {
  return kind == Kind::Constant ? a : a * std::pow(t, p);
}

void CoefficientBounds::validate(double T) const {
  if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("beta must lie in (0, 1), got " + fmt(beta));
  if (!c_nonpositive) throw ParameterError("the zeroth-order coefficient must satisfy c <= 0");
  if (!(K >= 0.0) || !std::isfinite(K)) throw ParameterError("drift bound K must be finite and >= 0");
  if (!(T > 0.0)) throw ParameterError("horizon T must be positive");

  auto check = [&](const Envelope& e, double q, const char* name) {
    if (!(e.a >= 0.0) || !std::isfinite(e.a) || !std::isfinite(e.p)) {
      throw ParameterError(std::string(name) + " envelope must be finite and nonnegative");
    }
    if (e.is_zero()) return;
    double first = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 20; ++k) {
      const double t = T * std::exp2(-k);
      const double v = std::pow(t, q) * e(t);
      if (k == 1) first = v;
      if (v > prev * (1.0 + 1e-12)) {
        throw ParameterError(std::string(name) + " envelope does not decay fast enough as t -> 0");
      }
      prev = v;
    }
    // A power law decays to zero iff its total exponent is positive, even when
    // the 20 dyadic samples have not yet dropped by three decades.
    if (!(prev < 1e-3 * first) && !(q + e.exponent() > 0.0)) {
      throw ParameterError(std::string(name) + " envelope does not decay fast enough as t -> 0");
    }
  };
  check(b0, 0.5, "b0");
  check(c0, 1.0 - beta, "c0");
}

void BaseBarrierParams::validate(const EllipticityPair& ell) const {
  if (n < 1 || n > kMaxDim) throw ParameterError("dimension must lie in [1, 8]");
  const double mid = 4.0 * n * ell.lambda * sigma;
  if (!(alpha > 0.0) || !(2.0 * alpha < mid) || !(mid < ell.ratio())) {
    throw ParameterError("need 0 < 2 alpha < 4 n lambda sigma < lambda/Lambda; got 2 alpha = " + fmt(2.0 * alpha) +
                         ", 4 n lambda sigma = " + fmt(mid) + ", lambda/Lambda = " + fmt(ell.ratio()));
  }
}

PsiUnit psi_unit(std::span<const double> x, double t, const BaseBarrierParams& p) {
  check_time(t);
  const int n = static_cast<int>(x.size());
  const double x2 = sq_norm(x);
  SymMatrix h = SymMatrix::outer(x, 4.0 * p.sigma * p.sigma / (t * t));
  for (int i = 0; i < n; ++i) h.add(i, i, -2.0 * p.sigma / t);
  return {2.0 * p.sigma * std::sqrt(x2) / t, h, -p.alpha / t + p.sigma * x2 / (t * t)};
}

Jet eval_psi(std::span<const double> x, double t, const BaseBarrierParams& p) {
  check_time(t);
  const double x2 = sq_norm(x);
  Jet j;
  j.value = std::pow(t, -p.alpha) * std::exp(-p.sigma * x2 / t);
  j.gradient.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) j.gradient[i] = -2.0 * p.sigma * x[i] / t * j.value;
  const PsiUnit u = psi_unit(x, t, p);
  j.hessian = j.value * u.hessian;
  j.dt = u.dt * j.value;
  return j;
}

PhiJet eval_phi(std::span<const double> x, double t, double beta) {
  check_time(t);
  if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("beta must lie in (0, 1)");
  const int n = static_cast<int>(x.size());
  const double x2 = sq_norm(x);
  const double tb = std::pow(t, beta);
  PhiJet out;
  Jet& j = out.jet;
  j.value = std::pow(t, 1.0 - beta) + (1.0 + tb) * x2;
  j.gradient.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) j.gradient[i] = 2.0 * (1.0 + tb) * x[i];
  j.hessian = SymMatrix(n);
  for (int i = 0; i < n; ++i) j.hessian.set(i, i, 2.0 * (1.0 + tb));
  j.dt = (1.0 - beta) * std::pow(t, -beta) + beta * std::pow(t, beta - 1.0) * x2;
  out.dt_bound_holds = std::abs(j.dt) <= std::pow(t, -beta) + std::pow(t, beta - 1.0) * x2;
  return out;
}

double psi_gamma(const BaseBarrierParams& p, const EllipticityPair& ell) {
  const double a = (2.0 * p.sigma * ell.lambda * p.n - p.alpha) / 2.0;
  const double b = (1.0 + 8.0 * p.sigma * ell.Lambda * (p.n / 2.0 - 1.0)) * p.sigma / 2.0;
  return std::min(a, b);
}

double phi_gamma(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("beta must lie in (0, 1)");
  return std::min(beta / 2.0, (1.0 - beta) / 2.0);
}

double psi_horizon(const BaseBarrierParams& p, const CoefficientBounds& cb, const EllipticityPair& ell,
                   double T_cap) {
  const double rhs = (2.0 * p.sigma * ell.lambda * p.n - p.alpha) / 2.0;
  const double denom = 1.0 - 4.0 * p.n * p.sigma * ell.Lambda;
  return horizon(
      [&](double t) {
        const double b = cb.b0(t);
        return 2.0 * t * p.sigma * b * b / denom + t * cb.c0(t) <= rhs;
      },
      T_cap);
}

double phi_horizon(const CoefficientBounds& cb, const EllipticityPair& ell, int n, double T_cap) {
  const double beta = cb.beta;
  return horizon(
      [&](double t) {
        const double b = cb.b0(t);
        const double c = cb.c0(t);
        const bool first = 4.0 * n * ell.Lambda * std::pow(t, beta) + 8.0 / beta * t * b * b + t * c < (1.0 - beta) / 2.0;
        // The derivation bounds 2 c0 (1 + t^beta) |x|^2 by 2 {c0 t^{1-beta}} t^{beta-1} |x|^2.
        const bool second = 2.0 * c * std::pow(t, 1.0 - beta) < beta / 2.0;
        return first && second;
      },
      std::min(1.0, T_cap));
}

std::vector<std::vector<double>> sample_directions(int n, int count, std::uint64_t seed) {
  std::vector<std::vector<double>> dirs;
  dirs.reserve(static_cast<std::size_t>(count));
  if (n == 1) {
    for (int k = 0; k < count; ++k) dirs.push_back({k % 2 == 0 ? 1.0 : -1.0});
    return dirs;
  }
  if (n == 2) {
    for (int k = 0; k < count; ++k) {
      const double a = 2.0 * std::numbers::pi * k / count;
      dirs.push_back({std::cos(a), std::sin(a)});
    }
    return dirs;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  for (int k = 0; k < count; ++k) {
    std::vector<double> d(static_cast<std::size_t>(n), 0.0);
    if (k < n) {
      d[static_cast<std::size_t>(k)] = 1.0;
    } else {
      for (double& v : d) v = gauss(rng);
      const double s = norm(d);
      for (double& v : d) v /= s;
    }
    dirs.push_back(std::move(d));
  }
  return dirs;
}

namespace {

// Shared sampled check: `lhs_rhs(x, t)` returns (lhs, rhs) in a common scale.
BarrierCertificate certify_on_grid(double gamma, double T_star, int n, const SampleGrid& grid, const char* what,
                                   const std::function<std::pair<double, double>(std::span<const double>, double)>& lhs_rhs) {
  check_grid(grid);
  BarrierCertificate cert{gamma, T_star, std::numeric_limits<double>::infinity(), 0};
  const auto dirs = sample_directions(n, grid.ndir, grid.seed);
  std::vector<double> x(static_cast<std::size_t>(n));
  for (double t : log_times(T_star, grid)) {
    for (double r : radii(grid)) {
      for (const auto& d : dirs) {
        for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = r * d[static_cast<std::size_t>(i)];
        const auto [lhs, rhs] = lhs_rhs(x, t);
        const double slack = (rhs - lhs) / std::abs(rhs);
        if (!(slack > 0.0)) {
          std::vector<double> pt(x);
          pt.push_back(t);
          throw CertificationFailure(std::string(what) + " supersolution inequality fails at a sample point", pt, lhs,
                                     rhs);
        }
        cert.margin = std::min(cert.margin, slack);
        ++cert.samples;
      }
    }
  }
  return cert;
}

}  // namespace

BarrierCertificate certify_psi(const BaseBarrierParams& p, const CoefficientBounds& cb, const EllipticityPair& ell,
                               double T, const SampleGrid& grid) {
  p.validate(ell);
  cb.validate(T);
  const double gamma = psi_gamma(p, ell);
  const double T1 = psi_horizon(p, cb, ell, T);
  const PucciOperator mplus(ell, PucciBranch::Plus);
  return certify_on_grid(gamma, T1, p.n, grid, "psi", [&](std::span<const double> x, double t) {
    // Everything divided by psi > 0; M+ is positively homogeneous.
    const PsiUnit u = psi_unit(x, t, p);
    const double lhs = -u.dt + mplus(u.hessian) + cb.b0(t) * u.grad_norm + cb.c0(t);
    const double rhs = -gamma * (t + sq_norm(x)) / (t * t);
    return std::pair{lhs, rhs};
  });
}

BarrierCertificate certify_phi(const CoefficientBounds& cb, const EllipticityPair& ell, int n, double T,
                               const SampleGrid& grid) {
  cb.validate(T);
  const double beta = cb.beta;
  const double gamma = phi_gamma(beta);
  const double T2 = phi_horizon(cb, ell, n, T);
  const PucciOperator mplus(ell, PucciBranch::Plus);
  return certify_on_grid(gamma, T2, n, grid, "phi", [&](std::span<const double> x, double t) {
    const PhiJet pj = eval_phi(x, t, beta);
    const Jet& j = pj.jet;
    const double lhs = -j.dt + mplus(j.hessian) + cb.b0(t) * norm(j.gradient) + cb.c0(t) * j.value;
    const double rhs = -gamma * (std::pow(t, -beta) + std::pow(t, beta - 1.0) * sq_norm(x));
    return std::pair{lhs, rhs};
  });
}

bool PsiEstimateReport::all_hold() const noexcept {
  return std::all_of(checks.begin(), checks.end(), [](const EstimateCheck& c) { return c.holds; });
}

PsiEstimateReport check_psi_estimates(const BaseBarrierParams& p, const EllipticityPair& ell, double T,
                                      const SampleGrid& grid) {
  p.validate(ell);
  check_grid(grid);
  const double gamma = psi_gamma(p, ell);
  const double C = 1.0 / gamma;
  double grad_ratio = 0.0;
  double hess_ratio = 0.0;
  double time_ratio = 0.0;
  PsiEstimateReport rep{gamma, {}, {}};
  const auto dirs = sample_directions(p.n, grid.ndir, grid.seed);
  std::vector<double> x(static_cast<std::size_t>(p.n));
  for (double t : log_times(T, grid)) {
    for (double r : radii(grid)) {
      for (const auto& d : dirs) {
        for (int i = 0; i < p.n; ++i) x[static_cast<std::size_t>(i)] = r * d[static_cast<std::size_t>(i)];
        const double x2 = sq_norm(x);
        const PsiUnit u = psi_unit(x, t, p);
        bool bad = false;
        // |D_i psi| <= (gamma t)^{-1} |x| psi, compared as 2 sigma |x_i| / t vs C |x| / t.
        for (int i = 0; i < p.n; ++i) {
          const double lhs = 2.0 * p.sigma * std::abs(x[static_cast<std::size_t>(i)]) / t;
          const double w = std::sqrt(x2) / t;
          if (w > 0.0) grad_ratio = std::max(grad_ratio, lhs / w);
          if (lhs > C * w * (1.0 + 1e-12)) bad = true;
        }
        for (int i = 0; i < p.n; ++i) {
          for (int j = i; j < p.n; ++j) {
            const double lhs = std::abs(u.hessian(i, j));
            const double w = ((i == j ? t : 0.0) + x2) / (t * t);
            if (w > 0.0) hess_ratio = std::max(hess_ratio, lhs / w);
            if (lhs > C * w * (1.0 + 1e-12)) bad = true;
          }
        }
        {
          const double lhs = std::abs(u.dt);
          const double w = (t + x2) / (t * t);
          time_ratio = std::max(time_ratio, lhs / w);
          if (lhs > C * w * (1.0 + 1e-12)) bad = true;
        }
        if (bad) {
          std::vector<double> pt(x);
          pt.push_back(t);
          rep.violations.push_back(std::move(pt));
        }
      }
    }
  }
  rep.checks.push_back({"gradient", "|D_i psi| <= (gamma_1 t)^{-1} |x| psi",
                        "|D_i psi| <= (gamma_1 t)^{-1} |x| psi", grad_ratio, C, grad_ratio <= C * (1.0 + 1e-12)});
  rep.checks.push_back({"hessian", "|D_ij psi| >= gamma_1^{-1} t^{-2} (delta_ij t + |x|^2) psi",
                        "|D_ij psi| <= gamma_1^{-1} t^{-2} (delta_ij t + |x|^2) psi", hess_ratio, C,
                        hess_ratio <= C * (1.0 + 1e-12)});
  rep.checks.push_back({"time", "|D_t psi| <= gamma_1^{-1} t^{-2} (delta_ij t + |x|^2) psi",
                        "|D_t psi| <= gamma_1^{-1} t^{-2} (t + |x|^2) psi", time_ratio, C,
                        time_ratio <= C * (1.0 + 1e-12)});
  return rep;
}

}  // namespace exb
