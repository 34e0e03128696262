// One line per criterion: PASS/FAIL, the measured quantities and the wall time.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>

#include "../oracles.hpp"
#include "exb/base_barriers.hpp"
#include "exb/cone_barrier.hpp"
#include "exb/error.hpp"
#include "exb/exceptional_sets.hpp"
#include "exb/experiments.hpp"
#include "exb/pucci.hpp"
#include "exb/solver.hpp"

using namespace exb;

namespace {

struct Outcome {
  bool ok;
  std::string detail;
};

int g_failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < limit_s;
  if (!in_time) o.detail += "; runtime over limit";
  const bool ok = o.ok && in_time;
  if (!ok) ++g_failures;
  std::printf("%s %2d %-22s %s [%.2f s < %.0f s]\n", ok ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs, limit_s);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... v) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, v...);
  return buf;
}

SymMatrix to_sym(const oracle::Mat& a) { return SymMatrix::from_upper(static_cast<int>(a.size()), oracle::upper(a)); }

Outcome pucci_properties() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.05, 4.0);
  double dual = 0.0, homog = 0.0, collapse = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int n = 2 + k % 5;
    const double lam = u(rng), Lam = lam + u(rng);
    const EllipticityPair ell(lam, Lam);
    const SymMatrix m = to_sym(oracle::random_symmetric(n, rng));
    const double s = u(rng);
    dual = std::max(dual, std::abs(pucci_plus(m, ell) + pucci_minus(-m, ell)));
    homog = std::max(homog, std::abs(pucci_plus(s * m, ell) - s * pucci_plus(m, ell)));
    const EllipticityPair eq(lam, lam);
    collapse = std::max(collapse, std::abs(pucci_plus(m, eq) - lam * m.trace()));
    collapse = std::max(collapse, std::abs(pucci_minus(m, eq) - lam * m.trace()));
  }
  return {dual < 1e-12 && homog < 1e-12 && collapse < 1e-12,
          fmt("duality %.2e, homogeneity %.2e, collapse %.2e (tol 1e-12, 1000 matrices)", dual, homog, collapse)};
}

Outcome radial_lemma() {
  // g(r) = r^p for ten powers and exp(-a r^2) for ten rates.
  struct Profile {
    std::function<double(double)> g, dg, ddg;
  };
  std::vector<Profile> profiles;
  for (int k = 0; k < 10; ++k) {
    const double p = -1.5 + 0.5 * k;
    profiles.push_back({[p](double r) { return std::pow(r, p); }, [p](double r) { return p * std::pow(r, p - 1); },
                        [p](double r) { return p * (p - 1) * std::pow(r, p - 2); }});
  }
  for (int k = 0; k < 10; ++k) {
    const double a = 0.2 + 0.3 * k;
    profiles.push_back({[a](double r) { return std::exp(-a * r * r); },
                        [a](double r) { return -2 * a * r * std::exp(-a * r * r); },
                        [a](double r) { return (4 * a * a * r * r - 2 * a) * std::exp(-a * r * r); }});
  }
  double worst = 0.0;
  for (int n = 2; n <= 4; ++n) {
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = 0.3 + 0.2 * i;
    const double r = norm(x);
    for (const auto& pr : profiles) {
      const auto got = radial_hessian_spectrum(pr.dg(r), pr.ddg(r), r, n);
      const ScalarField f = [&](std::span<const double> y) { return pr.g(norm(y)); };
      const SymMatrix H = fd_hessian(f, x);
      oracle::Mat a(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = H(i, j);
      const auto ref = oracle::eigenvalues(a);
      for (int k = 0; k < n; ++k) {
        const double e = std::abs(got[static_cast<std::size_t>(k)] - ref[static_cast<std::size_t>(k)]);
        worst = std::max(worst, e / std::max(1.0, std::abs(ref[static_cast<std::size_t>(k)])));
      }
    }
  }
  return {worst < 1e-6, fmt("max error %.2e over 20 profiles x n in {2,3,4} (tol 1e-6)", worst)};
}

Outcome psi_certificate() {
  const EllipticityPair ell(0.7, 1.0);
  const BaseBarrierParams p{0.2, 0.1, 2};
  // Closed form: min((2 sigma lambda n - alpha)/2, (1 + 8 sigma Lambda (n/2 - 1)) sigma/2).
  const double g_ref = std::min((2 * 0.1 * 0.7 * 2 - 0.2) / 2, (1 + 8 * 0.1 * 1.0 * 0.0) * 0.1 / 2);
  SampleGrid grid;
  grid.nt = 25;
  grid.nr = 25;
  grid.ndir = 16;
  const auto c = certify_psi(p, CoefficientBounds{}, ell, 1.0, grid);
  const bool ok = psi_gamma(p, ell) == g_ref && std::abs(g_ref - 0.04) < 1e-16 && c.margin > 0.0 && c.samples >= 10000;
  return {ok, fmt("gamma1 %.17g (closed form %.17g), margin %.4e on %zu points", psi_gamma(p, ell), g_ref, c.margin,
                  c.samples)};
}

Outcome phi_certificate() {
  const EllipticityPair ell(0.7, 1.0);
  bool ok = true;
  std::string d;
  for (double beta : {0.2, 0.5, 0.8}) {
    const double g = phi_gamma(beta);
    const double g_ref = std::min(beta / 2, (1 - beta) / 2);
    CoefficientBounds cb;
    cb.beta = beta;
    const double T2 = phi_horizon(cb, ell, 2, 1.0);
    const double tstar = std::pow((1 - beta) / (8 * 2 * 1.0), 1 / beta);
    const double rel = std::abs(T2 - tstar) / tstar;
    ok = ok && g == g_ref && rel < 1e-6;
    d += fmt("beta %.1f: gamma2 %.17g vs %.17g, T2 rel %.1e; ", beta, g, g_ref, rel);
  }
  return {ok, d};
}

Outcome cone_barriers() {
  const EllipticityPair ell(0.5, 1.0);
  const double th = 0.75 * std::numbers::pi;
  std::string d;
  bool ok = true;
  for (auto kind : {BarrierKind::Regular, BarrierKind::Singular}) {
    const ConeBarrier b = build_cone_barrier(th, ell, 2, kind);
    double lo = INFINITY, hi = -INFINITY;
    for (double r : {1e-3, 0.1, 1.0, 37.0}) {
      const std::vector<double> rs{r};
      const double e = certify_cone_barrier(b, ell, {}, rs).eta;
      lo = std::min(lo, e);
      hi = std::max(hi, e);
    }
    const double spread = (hi - lo) / hi;
    ok = ok && b.eta() > 0.0 && lo > 0.0 && spread < 1e-10;
    d += fmt("%s alpha %.4f eta %.4e spread %.1e; ", to_string(kind).c_str(), b.alpha(), b.eta(), spread);
  }
  // v = x_n = r cos(theta) at lambda = Lambda is harmonic: eta must come out as zero and be rejected.
  const ConeBarrier v = ConeBarrier::from_profile(
      0.5 * std::numbers::pi, 2, 1.0, [](double t) { return ProfileValue{std::cos(t), -std::sin(t), -std::cos(t)}; },
      1.0);
  try {
    certify_cone_barrier(v, EllipticityPair(1.0, 1.0));
    ok = false;
    d += "harmonic x_n certified (wrong)";
  } catch (const CertificationFailure& e) {
    const bool zero = std::abs(e.lhs()) < 1e-10;
    ok = ok && zero;
    d += fmt("harmonic x_n rejected, eta %.1e", -e.lhs());
  }
  return {ok, d};
}

Outcome covering() {
  CantorSpec s;
  s.ratio = 1.0 / 3.0;
  s.origin = {0.0};
  s.direction = {1.0};
  const double mu = 0.7, eps = 0.1;
  // Oracle: smallest m with m log 2 + mu m log(1/3) < log eps, in long double.
  int m_ref = 0;
  while (!(m_ref * std::log(2.0L) + mu * m_ref * std::log(1.0L / 3.0L) < std::log(static_cast<long double>(eps))))
    ++m_ref;
  const BallCover c = build_cover(s, mu, eps, 1.0);
  // All 2^m balls share the radius (1/3)^m.
  const double sum = std::ldexp(std::pow(std::pow(3.0, -c.level()), mu), c.level());
  const double sum30 = std::pow(2.0, 30) * std::pow(3.0, -30 * mu);
  bool rejected = false;
  try {
    build_cover(s, 0.5, eps, 1.0);
  } catch (const ParameterError&) {
    rejected = true;
  }
  const bool ok = c.level() == m_ref && sum < eps && rejected;
  return {ok, fmt("level %d (oracle %d; stated 30 gives sum %.4f >= 0.1), sum %.6f < 0.1, mu=0.5 %s", c.level(),
                  m_ref, sum30, sum, rejected ? "rejected" : "accepted")};
}

double heat_error(int cells, double lambda, double s0, double T) {
  const EllipticityPair ell(lambda, lambda);
  auto exact = [&](std::span<const double> x, double t) {
    return oracle::heat(std::vector<double>(x.begin(), x.end()), t, s0, lambda);
  };
  const GridCylinder cyl(Grid::cube(2, -0.5, 0.5, cells), T, ell, 0.0,
                         [&](std::span<const double> x) { return exact(x, 0.0); }, exact);
  SolveOptions o;
  o.save_every = 0;
  const SpaceTimeField f = solve(cyl, {}, ell, o);
  double err = 0.0;
  for (std::size_t i = 0; i < f.slabs.back().size(); ++i)
    err = std::max(err, std::abs(f.slabs.back()[i] - exact(f.grid.coords(i), f.times.back())));
  return err;
}

Outcome solver_consistency() {
  const double e64 = heat_error(64, 0.5, 0.02, 0.02), e128 = heat_error(128, 0.5, 0.02, 0.02);
  const double order = std::log2(e64 / e128);
  return {e128 < 2e-3 && order >= 1.8,
          fmt("error h=1/64 %.3e, h=1/128 %.3e (tol 2e-3), order %.3f (>= 1.8)", e64, e128, order)};
}

Outcome minimum_principle() {
  double worst = INFINITY;
  for (int run = 0; run < 50; ++run) {
    std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(run));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = run % 10 == 9 ? 3 : (run % 10 == 8 ? 1 : 2);
    const int cells = n == 3 ? 10 : 16 + static_cast<int>(u(rng) * 24);
    const double lam = 0.1 + 0.9 * u(rng), Lam = lam + u(rng);
    const EllipticityPair ell(lam, Lam);
    const double K = 2.0 * u(rng), c0 = 5.0 * u(rng);
    std::vector<double> cx(static_cast<std::size_t>(n)), freq(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      cx[static_cast<std::size_t>(i)] = u(rng);
      freq[static_cast<std::size_t>(i)] = 1.0 + 6.0 * u(rng);
    }
    const double amp = u(rng);
    // Nonnegative data with a zero set: a clipped oscillation.
    const SpaceFn init = [=](std::span<const double> x) {
      double s = 1.0;
      for (std::size_t i = 0; i < x.size(); ++i) s *= std::sin(freq[i] * (x[i] - cx[i]));
      return amp * std::max(0.0, s);
    };
    const SpaceTimeFn lat = [=](std::span<const double> x, double t) { return init(x) * std::exp(-t); };
    Coefficients co;
    co.K = K;
    co.drift = [=](std::span<const double> x, double t, std::span<double> b) {
      for (std::size_t i = 0; i < b.size(); ++i) b[i] = K * std::sin(3.0 * x[(i + 1) % x.size()] + t + static_cast<double>(i));
    };
    co.c = [=](std::span<const double> x, double) { return -c0 * x[0] * x[0]; };
    co.source = [=](std::span<const double> x, double) { return -0.1 * amp * x[0]; };
    const GridCylinder cyl(Grid::cube(n, 0.0, 1.0, cells), 0.05, ell, K, init, lat);
    SolveOptions o;
    o.save_every = 4;
    const SpaceTimeField f = solve(cyl, co, ell, o);
    worst = std::min(worst, f.min());
  }
  return {worst >= -1e-10, fmt("smallest field value %.3e over 50 runs (>= -1e-10)", worst)};
}

ExperimentReport run_config(const std::string& name) {
  return run_experiment(ExperimentConfig::from_file(std::string(EXB_CONFIG_DIR) + "/" + name));
}

// Verdict recomputed from the sweep table, independent of the report's own flags.
Outcome sweep_verdict(const ExperimentReport& r, std::string& d) {
  const auto& s = r.sweep;
  bool geometric = s.size() >= 5;
  for (std::size_t k = 2; k < s.size(); ++k)
    geometric = geometric && std::abs(s[k].width / s[k - 1].width - s[1].width / s[0].width) < 1e-12;
  bool nondecreasing = s.size() >= 3;
  for (std::size_t k = s.size() - std::min<std::size_t>(3, s.size()) + 1; k < s.size(); ++k)
    nondecreasing = nondecreasing && s[k].probe_min >= s[k - 1].probe_min - 1e-12;
  const double gap = s.empty() ? 0.0 : s.back().probe_min - s.back().control_min;
  double case_min = INFINITY, Lw = -INFINITY;
  for (const auto& e : s) {
    for (const auto& c : e.cases) case_min = std::min(case_min, c.min_value);
    case_min = std::min(case_min, e.chain_bound);
    Lw = std::max(Lw, e.Lw_max);
  }
  const bool ok = geometric && nondecreasing && gap >= 0.25 * r.dip && case_min >= -1e-8 && Lw < 1e-8;
  d += fmt("%zu widths, last minima %.3e %.3e %.3e, gap %.4f (>= %.4f), case margin %.3e, max Lw %.3e",
           s.size(), s.size() >= 3 ? s[s.size() - 3].probe_min : NAN, s.size() >= 2 ? s[s.size() - 2].probe_min : NAN,
           s.empty() ? NAN : s.back().probe_min, gap, 0.25 * r.dip, case_min, Lw);
  return {ok, d};
}

}  // namespace

int main() {
  criterion(1, "pucci", 5, pucci_properties);
  criterion(2, "radial-lemma", 5, radial_lemma);
  criterion(3, "psi-certificate", 10, psi_certificate);
  criterion(4, "phi-certificate", 5, phi_certificate);
  criterion(5, "cone-barrier", 60, cone_barriers);
  criterion(6, "covering", 1, covering);
  criterion(7, "solver-consistency", 120, solver_consistency);
  criterion(8, "minimum-principle", 120, minimum_principle);

  std::string base_hash;
  criterion(9, "base-boundary", 600, [&] {
    const ExperimentReport r = run_config("base.json");
    base_hash = r.hash();
    std::string d = fmt("ratio %.2f; ", r.parameters.at("lambda").get<double>() / r.parameters.at("Lambda").get<double>());
    return sweep_verdict(r, d);
  });
  criterion(10, "lateral-boundary", 600, [&] {
    const ExperimentReport r = run_config("lateral.json");
    const double C1 = r.certificates.at("singular").at("C1").get<double>();
    const double delta = r.parameters.at("delta").get<double>();
    const double eps1 = r.parameters.at("eps1").get<double>();
    const double L = r.parameters.at("L").get<double>();
    bool radii_ok = true;
    for (const auto& e : r.sweep) radii_ok = radii_ok && e.radius <= eps1;
    const bool eps_ok = C1 * std::pow(eps1, -delta) >= L && radii_ok;
    std::string d = fmt("C1 eps1^-delta = %.4f >= L = %.4f, radii <= eps1 %s; ", C1 * std::pow(eps1, -delta), L,
                        radii_ok ? "yes" : "no");
    Outcome o = sweep_verdict(r, d);
    o.ok = o.ok && eps_ok;
    return o;
  });
  criterion(11, "reproducibility", 600, [&] {
    const ExperimentReport r = run_config("base.json");
    return Outcome{!base_hash.empty() && r.hash() == base_hash, "hashes " + base_hash + " / " + r.hash()};
  });

  std::printf("%s: %d criteria failed\n", g_failures ? "FAILED" : "ALL PASSED", g_failures);
  return g_failures ? 1 : 0;
}
