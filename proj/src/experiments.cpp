#include "exb/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "exb/error.hpp"
#include "exb/solver.hpp"

namespace exb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCaseTol = 1e-8;
constexpr int kAngles = 64;

Envelope envelope_from_json(const nlohmann::json& j) {
  const std::string kind = j.value("kind", "constant");
  const double a = j.value("a", 0.0);
  if (kind == "constant") return Envelope::constant(a);
  if (kind == "power") return Envelope::power(a, j.value("p", 0.0));
  throw ConfigError("unknown envelope kind '" + kind + "'");
}

nlohmann::json envelope_to_json(const Envelope& e) {
  if (e.kind == Envelope::Kind::Constant) return {{"kind", "constant"}, {"a", e.a}};
  return {{"kind", "power"}, {"a", e.a}, {"p", e.p}};
}

std::vector<double> vec2(const nlohmann::json& j, const char* what) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != 2) throw ConfigError(std::string(what) + " must have two entries");
  return v;
}

double segment_distance(const SegmentSpec& seg, std::span<const double> x) {
  double u = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) u += (x[i] - seg.origin[i]) * seg.direction[i];
  u = std::clamp(u, 0.0, seg.length);
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - seg.origin[i] - u * seg.direction[i];
    d2 += d * d;
  }
  return std::sqrt(d2);
}

double dist2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Bilinear interpolation of a 2D slab, clamped to the box.
double interp2(const Grid& g, std::span<const double> u, std::span<const double> x) {
  const int nx = g.nodes(0), ny = g.nodes(1);
  const double fx = std::clamp((x[0] - g.lo[0]) / g.h, 0.0, static_cast<double>(nx - 1));
  const double fy = std::clamp((x[1] - g.lo[1]) / g.h, 0.0, static_cast<double>(ny - 1));
  const int i = std::min(static_cast<int>(fx), nx - 2);
  const int j = std::min(static_cast<int>(fy), ny - 2);
  const double a = fx - i, b = fy - j;
  const auto at = [&](int ii, int jj) { return u[static_cast<std::size_t>(jj) * static_cast<std::size_t>(nx) + ii]; };
  return (1 - a) * (1 - b) * at(i, j) + a * (1 - b) * at(i + 1, j) + (1 - a) * b * at(i, j + 1) + a * b * at(i + 1, j + 1);
}

struct CaseAcc {
  CaseResult res;

  explicit CaseAcc(std::string name) {
    res.name = std::move(name);
    res.min_value = kInf;
  }
  void add(double w, std::span<const double> x, double t) {
    ++res.points;
    if (w < res.min_value) {
      res.min_value = w;
      res.witness.assign(x.begin(), x.end());
      res.witness.push_back(t);
    }
  }
  CaseResult finish() {
    res.ok = res.points == 0 || res.min_value >= -kCaseTol;
    if (res.points == 0) res.min_value = 0.0;
    return res;
  }
};

// Largest m with ratio * l_m >= w (so the w-neighbourhood of E lies in the
// balls) subject to l_m <= cap.
int cover_level_for_width(const CantorSpec& spec, double w, double cap) {
  int m = spec.level;
  while (m < 60 && spec.ratio * spec.interval_length(m + 1) >= w) ++m;
  if (!(spec.ratio * spec.interval_length(m) >= w) || spec.interval_length(m) > cap) {
    throw ConfigError("patch width " + std::to_string(w) + " is too large for the admissible ball radius " +
                      std::to_string(cap));
  }
  return m;
}

template <class F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const CertificationFailure& e) {
    throw CertificationFailure(std::string("stage '") + name + "': " + e.what(), e.point(), e.lhs(), e.rhs());
  } catch (const ConstructionFailure& e) {
    throw ConstructionFailure(std::string("stage '") + name + "': " + e.what(), e.sweep());
  }
}

bool checked_slab(int k, int first, int stride) {
  const int rel = k - first;
  return rel >= 0 && (rel <= 32 || rel % std::max(stride, 1) == 0);
}

double kendall(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) s += (v[j] > v[i]) - (v[j] < v[i]);
  return s / (0.5 * static_cast<double>(n * (n - 1)));
}

void finish_trend(ExperimentReport& rep) {
  std::vector<double> mins;
  for (const auto& e : rep.sweep) mins.push_back(e.probe_min);
  rep.trend = kendall(mins);
  const std::size_t n = mins.size();
  rep.eventually_nondecreasing = n >= 3 && mins[n - 3] <= mins[n - 2] + 1e-12 && mins[n - 2] <= mins[n - 1] + 1e-12;
  rep.gap = n ? rep.sweep.back().probe_min - rep.sweep.back().control_min : 0.0;
  rep.trend_ok = rep.eventually_nondecreasing && rep.gap >= 0.25 * rep.dip;
  rep.control_persistent = true;
  for (const auto& e : rep.sweep) rep.control_persistent = rep.control_persistent && e.control_min <= -0.5 * rep.dip;
  rep.cases_ok = true;
  rep.Lw_ok = true;
  for (const auto& e : rep.sweep) {
    for (const auto& c : e.cases) rep.cases_ok = rep.cases_ok && c.ok;
    rep.cases_ok = rep.cases_ok && e.chain_bound >= 0.0;
    rep.Lw_ok = rep.Lw_ok && e.Lw_max < kCaseTol;
  }
}

nlohmann::json case_json(const CaseResult& c) {
  return {{"name", c.name}, {"min", c.min_value}, {"points", c.points}, {"ok", c.ok}, {"witness", c.witness}};
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Probe minimum of the control run over the first `steps` steps near `probe`.
double control_probe_min(const Grid& g, const EllipticityPair& ell, double dt, int first, int last,
                         const SpaceFn& initial, const SpaceTimeFn& lateral, std::span<const double> probe,
                         double radius) {
  GridCylinder cyl(g, last * dt, ell, 0.0, initial, lateral);
  double best = kInf;
  std::vector<double> x(2);
  SolveOptions opts;
  opts.save_every = 0;
  opts.observer = [&](int k, double, std::span<const double> slab) {
    if (k < first || k > last) return;
    for (std::size_t i = 0; i < slab.size(); ++i) {
      if (g.on_boundary(i)) continue;
      g.coords(i, x);
      if (dist2(x, probe) <= radius * radius) best = std::min(best, slab[i]);
    }
  };
  solve(cyl, {}, ell, opts);
  return best;
}

}  // namespace

EllipticityPair ellipticity_from_json(const nlohmann::json& j) {
  try {
    return EllipticityPair(j.at("lambda").get<double>(), j.at("Lambda").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed ellipticity: ") + e.what());
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

CoefficientBounds coefficients_from_json(const nlohmann::json& j) {
  try {
    CoefficientBounds cb;
    cb.beta = j.value("beta", 0.5);
    if (j.contains("b0")) cb.b0 = envelope_from_json(j.at("b0"));
    if (j.contains("c0")) cb.c0 = envelope_from_json(j.at("c0"));
    cb.K = j.value("K", 0.0);
    return cb;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed coefficients: ") + e.what());
  }
}

nlohmann::json coefficients_to_json(const CoefficientBounds& cb) {
  return {{"beta", cb.beta}, {"b0", envelope_to_json(cb.b0)}, {"c0", envelope_to_json(cb.c0)}, {"K", cb.K}};
}

double lateral_eps1_bound(double C1, double delta, double L) {
  if (!(C1 > 0.0) || !(delta > 0.0) || !(L > 0.0)) throw ParameterError("C1, delta and L must be positive");
  return std::pow(C1 / L, 1.0 / delta);
}

double bump(double s) {
  if (!(s < 1.0)) return 0.0;
  const double q = 1.0 - s * s;
  return q * q * q;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<double> ExperimentConfig::geometric_widths(double start, double factor, int count) {
  if (!(start > 0.0) || !(factor > 0.0 && factor < 1.0) || count < 0) {
    throw ConfigError("sweep needs start > 0, factor in (0,1) and count >= 0");
  }
  std::vector<double> w;
  for (int k = 0; k < count; ++k) w.push_back(start * std::pow(factor, k));
  return w;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  try {
    if (!j.contains("schema_version")) throw ConfigError("config lacks schema_version");
    if (j.at("schema_version").get<int>() != 1) throw ConfigError("unsupported schema_version");
    ExperimentConfig c;
    const std::string which = j.value("experiment", "base");
    if (which == "base")
      c.which = ExperimentKind::Base;
    else if (which == "lateral")
      c.which = ExperimentKind::Lateral;
    else
      throw ConfigError("experiment must be 'base' or 'lateral'");
    if (c.which == ExperimentKind::Lateral) c.ell = EllipticityPair(0.7, 1.0);
    if (j.contains("ellipticity")) c.ell = ellipticity_from_json(j.at("ellipticity"));
    const auto& cj = j.at("cantor");
    c.cantor.ratio = cj.at("ratio").get<double>();
    c.cantor.level = cj.value("level", 0);
    c.cantor.a = 0.0;
    c.cantor.b = cj.at("length").get<double>();
    c.cantor.origin = vec2(cj.at("origin"), "cantor.origin");
    c.cantor.direction = vec2(cj.at("direction"), "cantor.direction");
    c.cantor.validate();
    if (j.contains("coefficients")) c.coefficients = coefficients_from_json(j.at("coefficients"));
    c.L = j.value("L", c.L);
    c.tau = j.value("tau", c.tau);
    c.dip = j.value("dip", c.L);
    if (j.contains("box")) {
      const auto& b = j.at("box");
      c.box_lo = b.value("lo", c.box_lo);
      c.box_hi = b.value("hi", c.box_hi);
      c.cells = b.value("cells", c.cells);
    }
    const auto& g = j.at("geometry");
    c.y0 = vec2(g.at(c.which == ExperimentKind::Base ? "y0" : "z0"), "geometry point");
    c.r = g.value("r", c.r);
    c.T = g.value("T", c.T);
    if (g.contains("alpha")) c.alpha = g.at("alpha").get<double>();
    if (g.contains("sigma")) c.sigma = g.at("sigma").get<double>();
    if (g.contains("theta0_over_pi")) c.theta0 = g.at("theta0_over_pi").get<double>() * std::numbers::pi;
    if (g.contains("s")) c.s = g.at("s").get<double>();
    if (g.contains("t0")) c.t0 = g.at("t0").get<double>();
    c.s_factor = g.value("s_factor", c.s_factor);
    const auto& ctl = j.at("control");
    c.control.origin = vec2(ctl.at("origin"), "control.origin");
    c.control.direction = vec2(ctl.at("direction"), "control.direction");
    c.control.length = ctl.at("length").get<double>();
    c.control_probe = vec2(ctl.at("probe"), "control.probe");
    const auto& sw = j.at("sweep");
    if (sw.contains("widths")) {
      c.widths = sw.at("widths").get<std::vector<double>>();
    } else {
      const double h = (c.box_hi - c.box_lo) / c.cells;
      c.widths = geometric_widths(sw.value("start_cells", 3.0) * h, sw.value("factor", 0.5), sw.value("count", 8));
    }
    for (std::size_t i = 0; i < c.widths.size(); ++i) {
      if (!(c.widths[i] > 0.0) || (i && !(c.widths[i] < c.widths[i - 1]))) {
        throw ConfigError("sweep widths must be positive and strictly decreasing");
      }
    }
    if (j.contains("probe")) {
      c.probe_radius_cells = j.at("probe").value("radius_cells", c.probe_radius_cells);
      c.probe_steps = j.at("probe").value("steps", c.probe_steps);
    }
    c.check_stride = j.value("check_stride", c.check_stride);
    if (!(c.L > 0.0) || !(c.dip >= 0.0) || c.dip > c.L || !(c.r > 0.0) || !(c.T > 0.0) || c.cells < 8 || !(c.box_hi > c.box_lo) ||
        c.probe_steps < 1 || !(c.probe_radius_cells > 0.0)) {
      throw ConfigError("need L > 0, 0 <= dip <= L, positive r, T, box and probe settings, cells >= 8");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json j;
  j["which"] = which;
  j["parameters"] = parameters;
  j["certificates"] = certificates;
  auto rows = nlohmann::json::array();
  for (const auto& e : sweep) {
    auto cases = nlohmann::json::array();
    for (const auto& c : e.cases) cases.push_back(case_json(c));
    rows.push_back({{"width", e.width},
                    {"level", e.level},
                    {"balls", e.balls},
                    {"radius", e.radius},
                    {"eps", e.eps},
                    {"probe_min", e.probe_min},
                    {"control_min", e.control_min},
                    {"cases", cases},
                    {"chain_bound", e.chain_bound},
                    {"Lw_max", e.Lw_max},
                    {"Lw_nodes", e.Lw_nodes},
                    {"tail_ratio_max", e.tail_ratio_max},
                    {"u_min", e.u_min},
                    {"u_max", e.u_max}});
  }
  j["sweep"] = rows;
  j["trend"] = trend;
  j["eventually_nondecreasing"] = eventually_nondecreasing;
  j["gap"] = gap;
  j["dip"] = dip;
  j["verdict"] = {{"trend", trend_ok}, {"control_persistent", control_persistent}, {"cases", cases_ok}, {"Lw", Lw_ok}};
  j["notes"] = notes;
  return j;
}

std::string ExperimentReport::hash() const {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

ExperimentReport run_base_experiment(const ExperimentConfig& cfg) {
  const EllipticityPair& ell = cfg.ell;
  const int n = 2;
  const double ratio = ell.ratio();
  const CantorSpec& spec = cfg.cantor;
  spec.validate();
  if (spec.embed_dim() != n || cfg.y0.size() != 2) throw ConfigError("the base experiment runs in two dimensions");
  const double dimE = spec.dimension();
  if (!(dimE < ratio)) throw ParameterError("dim E must be below lambda/Lambda");
  const CoefficientBounds& cb = cfg.coefficients;
  if (!(cfg.tau > 0.0 && cfg.tau < cb.beta)) throw ParameterError("tau must lie in (0, beta)");
  cb.validate(cfg.T);

  const double delta = 0.5 * (ratio - dimE);
  const double s_exp = ratio - delta;
  const double alpha = cfg.alpha.value_or(0.5 * (s_exp + 0.75 * (ratio - s_exp)));
  const double sigma = cfg.sigma.value_or(0.5 * (2.0 * alpha + ratio) / (4.0 * n * ell.lambda));
  const BaseBarrierParams psi{alpha, sigma, n};
  psi.validate(ell);

  SampleGrid sg;
  sg.radius = 2.0 * cfg.r;
  const auto psi_cert = stage("psi certificate", [&] { return certify_psi(psi, cb, ell, cfg.T, sg); });
  const auto phi_cert = stage("phi certificate", [&] { return certify_phi(cb, ell, n, cfg.T, sg); });
  const double c_psi = std::pow(2.0, -alpha) * std::exp(-sigma);
  const auto cp = choose_cover_parameters(ell, dimE, c_psi, alpha, cfg.L, cfg.r, cfg.T);

  const Grid grid = Grid::cube(n, cfg.box_lo, cfg.box_hi, cfg.cells);
  for (int a = 0; a < n; ++a) {
    if (!(cfg.y0[a] - cfg.r > cfg.box_lo && cfg.y0[a] + cfg.r < cfg.box_hi)) {
      throw ConfigError("the ball B_r(y0) must lie inside the box");
    }
  }
  const double dt = GridCylinder(grid, cfg.T, ell, 0.0, {}, {}).dt;
  // The discrete operator is only compared with the barrier inequalities
  // below their horizons; the shifted psi terms live at t + nu^2.
  const double t_check = std::min({cfg.r, psi_cert.T_star - cp.nu * cp.nu, phi_cert.T_star});

  ExperimentReport rep;
  rep.which = "base";
  rep.dip = cfg.dip;
  rep.parameters = {{"lambda", ell.lambda},
                    {"Lambda", ell.Lambda},
                    {"n", n},
                    {"dimE", dimE},
                    {"delta", delta},
                    {"series_exponent", s_exp},
                    {"alpha", alpha},
                    {"sigma", sigma},
                    {"beta", cb.beta},
                    {"tau", cfg.tau},
                    {"L", cfg.L},
                    {"dip", cfg.dip},
                    {"r", cfg.r},
                    {"T", cfg.T},
                    {"nu", cp.nu},
                    {"c_psi", c_psi},
                    {"h", grid.h},
                    {"dt", dt},
                    {"t_check", t_check},
                    {"y0", cfg.y0},
                    {"b0", envelope_to_json(cb.b0)},
                    {"c0", envelope_to_json(cb.c0)},
                    {"M", cb.c0.is_zero() ? 0.0 : cb.c0(cfg.T)},
                    {"widths", cfg.widths}};
  rep.certificates = {
      {"psi", {{"gamma", psi_cert.gamma}, {"T_star", psi_cert.T_star}, {"margin", psi_cert.margin}, {"samples", psi_cert.samples}}},
      {"phi", {{"gamma", phi_cert.gamma}, {"T_star", phi_cert.T_star}, {"margin", phi_cert.margin}, {"samples", phi_cert.samples}}}};
  rep.notes.push_back("simulated coefficients: b = 0, c = 0, f = 0 (members of the declared class)");
  rep.notes.push_back("data: -dip * bump(dist(x, E) / w), lateral data 0");
  rep.notes.push_back("case III constant: 2^-alpha exp(-sigma)");
  rep.notes.push_back("checked slabs: first 33 steps, then every " + std::to_string(cfg.check_stride) + "-th, up to t_check");
  if (t_check < cfg.r) rep.notes.push_back("barrier horizon below r: operator checks stop at t_check");

  const double probe_r = cfg.probe_radius_cells * grid.h;
  const int nsteps = static_cast<int>(std::lround(cfg.T / dt));

  for (double w : cfg.widths) {
    SweepEntry e;
    e.width = w;
    e.level = cover_level_for_width(spec, w, cp.nu);
    if (e.level > 20) throw ConfigError("patch width needs more than 2^20 balls");
    const BallCover cover = cover_at_level(spec, e.level, s_exp, cp.nu);
    const ParaboloidCover pc{cover};
    e.balls = cover.count();
    e.radius = cover.radius(0);
    e.eps = cover.sum_power(s_exp);
    e.chain_bound = -cfg.L + c_psi * std::pow(e.radius, s_exp - 2.0 * alpha);
    const BaseAuxiliary aux(cfg.y0, cfg.L, cfg.r, cb.beta, psi, cover, s_exp, cfg.T);

    const SpaceFn initial = [&](std::span<const double> x) {
      return -cfg.dip * bump(cantor_distance(spec, 40, x) / w);
    };
    GridCylinder cyl(grid, cfg.T, ell, 0.0, initial, {});

    CaseAcc c1("I: sphere"), c2("II: base outside P"), c3("III: paraboloid walls");
    double probe = kInf, umin = kInf, umax = -kInf, growth = 0.0, Lw = -kInf, tail = 0.0;
    std::size_t Lw_nodes = 0;
    std::vector<double> prev;
    std::vector<double> x(2);
    const PucciOperator mplus(ell, PucciBranch::Plus);
    const double r2 = cfg.r * cfg.r;

    SolveOptions opts;
    opts.save_every = 0;
    opts.observer = [&](int k, double t, std::span<const double> u) {
      for (double v : u) {
        umin = std::min(umin, v);
        umax = std::max(umax, v);
      }
      if (k > 0) growth = std::max(growth, *std::max_element(u.begin(), u.end()) * std::pow(t, cfg.tau));
      if (k >= 1 && k <= cfg.probe_steps) {
        for (std::size_t i = 0; i < u.size(); ++i) {
          if (grid.on_boundary(i)) continue;
          grid.coords(i, x);
          if (dist2(x, cfg.y0) <= probe_r * probe_r) probe = std::min(probe, u[i]);
        }
      }
      if (k == 0) {
        for (std::size_t i = 0; i < u.size(); ++i) {
          grid.coords(i, x);
          if (dist2(x, cfg.y0) < r2 && !cover.contains(x)) c2.add(u[i] + aux.value(x, 0.0), x, 0.0);
        }
      }
      // Discrete L w on slab k-1, which needs slab k for the time difference.
      const int kp = k - 1;
      const double tp = kp * dt;
      if (kp >= 1 && tp < t_check && checked_slab(kp, 1, cfg.check_stride)) {
        for (std::size_t i = 0; i < u.size(); ++i) {
          if (grid.on_boundary(i)) continue;
          grid.coords(i, x);
          if (dist2(x, cfg.y0) + tp * tp >= r2) continue;
          bool in_closure = false;
          for (const auto& c : aux.centers()) {
            if (dist2(x, c) + tp <= e.radius * e.radius) {
              in_closure = true;
              break;
            }
          }
          if (in_closure) continue;
          const Jet jb = aux.jet(x, tp);
          SymMatrix H = discrete_hessian(grid, prev, i);
          H += jb.hessian;
          const double lw = mplus(H) - (u[i] - prev[i]) / dt - jb.dt;
          Lw = std::max(Lw, lw);
          ++Lw_nodes;
          tail = std::max(tail, aux.series(x, tp) / aux.series_bound(tp));
        }
      }
      if (t < cfg.r && (k == 0 || checked_slab(k, 1, cfg.check_stride))) {
        const double rho = std::sqrt(r2 - t * t);
        for (int a = 0; a < kAngles; ++a) {
          const double th = 2.0 * std::numbers::pi * a / kAngles;
          x[0] = cfg.y0[0] + rho * std::cos(th);
          x[1] = cfg.y0[1] + rho * std::sin(th);
          if (paraboloid_membership(pc, x, t)) continue;
          c1.add(interp2(grid, u, x) + aux.value(x, t), x, t);
        }
        for (const auto& c : aux.centers()) {
          const double q = e.radius * e.radius - t;
          if (!(q > 0.0)) break;
          const double rho_i = std::sqrt(q);
          for (int a = 0; a < kAngles; ++a) {
            const double th = 2.0 * std::numbers::pi * a / kAngles;
            x[0] = c[0] + rho_i * std::cos(th);
            x[1] = c[1] + rho_i * std::sin(th);
            if (dist2(x, cfg.y0) + t * t >= r2 || paraboloid_membership(pc, x, t)) continue;
            c3.add(interp2(grid, u, x) + aux.value(x, t), x, t);
          }
        }
      }
      prev.assign(u.begin(), u.end());
    };
    solve(cyl, {}, ell, opts);
    (void)nsteps;

    e.probe_min = probe;
    e.u_min = umin;
    e.u_max = umax;
    e.Lw_max = Lw_nodes ? Lw : 0.0;
    e.Lw_nodes = Lw_nodes;
    e.tail_ratio_max = tail;
    e.cases = {c1.finish(), c2.finish(), c3.finish()};
    CaseResult hyp;
    hyp.name = "growth: sup u t^tau <= L";
    hyp.min_value = cfg.L - growth;
    hyp.points = 1;
    hyp.ok = hyp.min_value >= 0.0;
    e.cases.push_back(hyp);

    const SegmentSpec seg = cfg.control;
    const SpaceFn ctl_initial = [&](std::span<const double> x) {
      return -cfg.dip * bump(segment_distance(seg, x) / w);
    };
    e.control_min =
        control_probe_min(grid, ell, dt, 1, cfg.probe_steps, ctl_initial, {}, cfg.control_probe, probe_r);
    rep.sweep.push_back(std::move(e));
  }
  finish_trend(rep);
  return rep;
}

ExperimentReport run_lateral_experiment(const ExperimentConfig& cfg) {
  const EllipticityPair& ell = cfg.ell;
  const int n = 2;
  const CantorSpec& spec = cfg.cantor;
  spec.validate();
  if (spec.embed_dim() != n || cfg.y0.size() != 2) throw ConfigError("the lateral experiment runs in two dimensions");
  if (!(cfg.theta0 > 0.5 * std::numbers::pi && cfg.theta0 < std::numbers::pi)) {
    throw ConfigError("the cone aperture must exceed pi/2 so the half-plane fits inside it");
  }
  const Grid grid = Grid::cube(n, cfg.box_lo, cfg.box_hi, cfg.cells);
  const double lo = cfg.box_lo;
  // E and z0 sit on the bottom edge; the domain lies above it.
  if (std::abs(cfg.y0[1] - lo) > 1e-12 || std::abs(spec.direction[1]) > 1e-12 ||
      std::abs(spec.origin[1] - lo) > 1e-12) {
    throw ConfigError("the lateral experiment places E and z0 on the bottom edge");
  }
  const std::vector<double> axis{0.0, 1.0};
  const CoefficientBounds& cb = cfg.coefficients;
  const double dimE = spec.dimension();

  ConeBarrier reg = stage("regular cone barrier", [&] { return build_cone_barrier(cfg.theta0, ell, n, BarrierKind::Regular); });
  ConeBarrier sing =
      stage("singular cone barrier", [&] { return build_cone_barrier(cfg.theta0, ell, n, BarrierKind::Singular); });
  const double mu = -sing.alpha();
  if (!(dimE < mu)) throw ParameterError("dim E must be below the singular barrier order");
  const double delta = 0.5 * (mu - dimE);
  const double r = cfg.r;
  const double r0 = 4.0 * r;
  if (!(cfg.y0[0] - r > lo && cfg.y0[0] + r < cfg.box_hi && lo + r < cfg.box_hi)) {
    throw ConfigError("the half ball B_r(z0) must lie inside the box");
  }
  const std::vector<std::vector<double>> pts{cfg.y0}, axes{axis};
  const double theta_max = 0.5 * std::numbers::pi;
  const auto reg_cert =
      stage("regular barrier family", [&] { return certify_barrier_family(reg, pts, axes, cb.K, ell, r0, theta_max); });
  const auto sing_cert =
      stage("singular barrier family", [&] { return certify_barrier_family(sing, pts, axes, cb.K, ell, r0, theta_max); });

  // With t - t0 = -s the time term contributes 2L/s to L w, which the regular
  // barrier must absorb: s > 2 r^2 C1 / C5.
  const double s_min = 2.0 * r * r * reg_cert.C1 / reg_cert.C5;
  const double dt_cfl = GridCylinder::cfl_step(grid.h, n, ell, cb.K);
  const double dt = dt_cfl * (1.0 - 1e-9);
  const double s_req = cfg.s.value_or(cfg.s_factor * s_min);
  if (!(s_req > s_min)) throw ConfigError("s must exceed 2 r^2 C1/C5 = " + std::to_string(s_min));
  const int Ns = static_cast<int>(std::ceil(s_req / dt));
  const int Nt0 = cfg.t0 ? static_cast<int>(std::ceil(*cfg.t0 / dt)) : Ns + cfg.probe_steps + 16;
  if (Nt0 <= Ns) throw ConfigError("t0 must exceed s");
  const int Nend = Nt0 + Ns + 1;
  const double s = Ns * dt, t0 = Nt0 * dt, T = Nend * dt;

  const double C1s = sing_cert.C1;
  const double eps1 = std::min(0.9 * r, lateral_eps1_bound(C1s, delta, cfg.L));

  ExperimentReport rep;
  rep.which = "lateral";
  rep.dip = cfg.dip;
  rep.parameters = {{"lambda", ell.lambda},
                    {"Lambda", ell.Lambda},
                    {"n", n},
                    {"theta0", cfg.theta0},
                    {"dimE", dimE},
                    {"mu", mu},
                    {"delta", delta},
                    {"series_exponent", mu - delta},
                    {"alpha_regular", reg.alpha()},
                    {"alpha_singular", sing.alpha()},
                    {"eta_regular", reg.eta()},
                    {"eta_singular", sing.eta()},
                    {"L", cfg.L},
                    {"dip", cfg.dip},
                    {"r", r},
                    {"r0", r0},
                    {"s", s},
                    {"s_min", s_min},
                    {"t0", t0},
                    {"T", T},
                    {"eps1", eps1},
                    {"eps1_condition", C1s * std::pow(eps1, -delta) - cfg.L},
                    {"h", grid.h},
                    {"dt", dt},
                    {"z0", cfg.y0},
                    {"widths", cfg.widths}};
  auto cert_json = [](const StrongBarrierCertificate& c) {
    return nlohmann::json{{"order", c.mu_order}, {"C1", c.C1}, {"C2", c.C2}, {"C3", c.C3}, {"C4", c.C4},
                          {"C5", c.C5},          {"r0", c.r0}, {"K", c.K},   {"samples", c.samples}};
  };
  rep.certificates = {{"regular", cert_json(reg_cert)}, {"singular", cert_json(sing_cert)}};
  rep.notes.push_back("simulated coefficients: b = 0, c = 0, f = 0 (members of the declared class)");
  rep.notes.push_back("data: initial 0, bottom edge -dip * bump(dist(x, E) / w) for t > 0");
  rep.notes.push_back("separate C1 constants for the regular and singular barriers");
  rep.notes.push_back("time term (L/s^2)(t - t0)^2 with s > 2 r^2 C1/C5");

  const double probe_r = cfg.probe_radius_cells * grid.h;
  const int nx = grid.nodes(0);
  const double r2 = r * r;

  for (double w : cfg.widths) {
    SweepEntry e;
    e.width = w;
    e.level = cover_level_for_width(spec, w, eps1);
    if (e.level > 20) throw ConfigError("patch width needs more than 2^20 balls");
    const BallCover cover = cover_at_level(spec, e.level, mu - delta, eps1);
    const LateralAuxiliary aux(cfg.y0, axis, cfg.L, r, s, t0, reg, reg_cert.C1, sing, cover, mu - delta, r0);
    e.balls = aux.centers().size();
    e.radius = cover.radius(0);
    e.eps = static_cast<double>(e.balls) * aux.weight();
    e.chain_bound = -cfg.L + C1s * std::pow(e.radius, -delta);
    const double ri2 = e.radius * e.radius;
    auto in_ball = [&](std::span<const double> x, bool closed) {
      for (const auto& c : aux.centers()) {
        const double d = dist2(x, c);
        if (closed ? d <= ri2 : d < ri2) return true;
      }
      return false;
    };

    auto edge_data = [&](auto dist_fn) {
      std::vector<double> v(static_cast<std::size_t>(nx));
      std::vector<double> x(2);
      for (int i = 0; i < nx; ++i) {
        x[0] = lo + i * grid.h;
        x[1] = lo;
        v[static_cast<std::size_t>(i)] = -cfg.dip * bump(dist_fn(x) / w);
      }
      return v;
    };
    auto lateral_from = [&](std::vector<double> edge) -> SpaceTimeFn {
      return [edge = std::move(edge), lo, hgrid = grid.h](std::span<const double> x, double t) {
        if (t <= 0.0 || x[1] != lo) return 0.0;
        return edge[static_cast<std::size_t>(std::lround((x[0] - lo) / hgrid))];
      };
    };
    const SpaceTimeFn lateral =
        lateral_from(edge_data([&](std::span<const double> x) { return cantor_distance(spec, 40, x); }));
    const GridCylinder cyl(grid, T, ell, cb.K, {}, lateral);

    CaseAcc c1("1: cylinder wall"), c2("2: lateral boundary outside P"), c3("3: ball walls");
    double probe = kInf, umin = kInf, umax = -kInf, Lw = -kInf, tail = 0.0;
    std::size_t Lw_nodes = 0;
    std::vector<double> prev;
    std::vector<double> x(2);
    const PucciOperator mplus(ell, PucciBranch::Plus);
    const int first = Nt0 - Ns;

    SolveOptions opts;
    opts.save_every = 0;
    opts.observer = [&](int k, double, std::span<const double> u) {
      const double t = k * dt;
      for (double v : u) {
        umin = std::min(umin, v);
        umax = std::max(umax, v);
      }
      if (std::abs(k - Nt0) <= cfg.probe_steps) {
        for (std::size_t i = 0; i < u.size(); ++i) {
          if (grid.on_boundary(i)) continue;
          grid.coords(i, x);
          if (dist2(x, cfg.y0) <= probe_r * probe_r) probe = std::min(probe, u[i]);
        }
      }
      const int kp = k - 1;
      if (std::abs(kp - Nt0) < Ns && (checked_slab(kp, first, cfg.check_stride) || std::abs(kp - Nt0) <= 32)) {
        const double tp = kp * dt;
        for (std::size_t i = 0; i < u.size(); ++i) {
          if (grid.on_boundary(i)) continue;
          grid.coords(i, x);
          if (dist2(x, cfg.y0) >= r2 || in_ball(x, true)) continue;
          const Jet jb = aux.jet(x, tp);
          SymMatrix H = discrete_hessian(grid, prev, i);
          H += jb.hessian;
          Lw = std::max(Lw, mplus(H) - (u[i] - prev[i]) / dt - jb.dt);
          ++Lw_nodes;
          tail = std::max(tail, aux.series(x) / aux.series_bound(x, sing_cert.C2));
        }
      }
      const int rel = std::abs(k - Nt0);
      if (rel <= Ns && (checked_slab(k, first, cfg.check_stride) || rel <= 32 || rel == Ns)) {
        for (int a = 0; a <= kAngles; ++a) {
          const double th = std::numbers::pi * a / kAngles;
          x[0] = cfg.y0[0] + r * std::cos(th);
          x[1] = std::max(lo, cfg.y0[1] + r * std::sin(th));
          if (in_ball(x, false)) continue;
          c1.add(interp2(grid, u, x) + aux.value(x, t), x, t);
        }
        for (std::size_t i = 0; i < u.size(); ++i) {
          grid.coords(i, x);
          if (dist2(x, cfg.y0) >= r2 || in_ball(x, false)) continue;
          if (rel == Ns) {
            c1.add(u[i] + aux.value(x, t), x, t);
          } else if (x[1] == lo) {
            c2.add(u[i] + aux.value(x, t), x, t);
          }
        }
        for (const auto& c : aux.centers()) {
          for (int a = 0; a <= kAngles; ++a) {
            const double th = std::numbers::pi * a / kAngles;
            x[0] = c[0] + e.radius * std::cos(th);
            x[1] = std::max(lo, c[1] + e.radius * std::sin(th));
            if (dist2(x, cfg.y0) >= r2) continue;
            bool other = false;
            for (const auto& c2b : aux.centers()) {
              if (&c2b != &c && dist2(x, c2b) < ri2) other = true;
            }
            if (other) continue;
            c3.add(interp2(grid, u, x) + aux.value(x, t), x, t);
          }
        }
      }
      prev.assign(u.begin(), u.end());
    };
    solve(cyl, {}, ell, opts);

    e.probe_min = probe;
    e.u_min = umin;
    e.u_max = umax;
    e.Lw_max = Lw_nodes ? Lw : 0.0;
    e.Lw_nodes = Lw_nodes;
    e.tail_ratio_max = tail;
    e.cases = {c1.finish(), c2.finish(), c3.finish()};

    const SegmentSpec seg = cfg.control;
    const SpaceTimeFn ctl_lateral =
        lateral_from(edge_data([&](std::span<const double> x) { return segment_distance(seg, x); }));
    e.control_min = control_probe_min(grid, ell, dt, Nt0 - cfg.probe_steps, Nt0 + cfg.probe_steps, {}, ctl_lateral,
                                      cfg.control_probe, probe_r);
    rep.sweep.push_back(std::move(e));
  }
  finish_trend(rep);
  return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  return cfg.which == ExperimentKind::Base ? run_base_experiment(cfg) : run_lateral_experiment(cfg);
}

std::string sweep_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "index,width,level,balls,radius,eps,probe_min,control_min,case1_min,case2_min,case3_min,chain_bound,Lw_max,"
        "tail_ratio_max\n";
  for (std::size_t i = 0; i < report.sweep.size(); ++i) {
    const auto& e = report.sweep[i];
    os << i << ',' << fmt(e.width) << ',' << e.level << ',' << e.balls << ',' << fmt(e.radius) << ',' << fmt(e.eps)
       << ',' << fmt(e.probe_min) << ',' << fmt(e.control_min);
    for (std::size_t c = 0; c < 3; ++c) os << ',' << fmt(c < e.cases.size() ? e.cases[c].min_value : 0.0);
    os << ',' << fmt(e.chain_bound) << ',' << fmt(e.Lw_max) << ',' << fmt(e.tail_ratio_max) << '\n';
  }
  return os.str();
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>& series,
                          bool log_x) {
  const double W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 50;
  double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
  auto tx = [&](double x) { return log_x ? std::log10(x) : x; };
  for (const auto& s : series) {
    for (const auto& [x, y] : s.second) {
      if (!std::isfinite(y) || (log_x && !(x > 0.0))) continue;
      x0 = std::min(x0, tx(x));
      x1 = std::max(x1, tx(x));
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!(x1 > x0)) {
    x0 = std::isfinite(x0) ? x0 - 1 : 0;
    x1 = x0 + 2;
  }
  if (!(y1 > y0)) {
    y0 = std::isfinite(y0) ? y0 - 1 : 0;
    y1 = y0 + 2;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return ml + (tx(x) - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title) << "</text>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(xlabel)
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
     << ")\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(ylabel) << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = y0 + (y1 - y0) * i / 4.0;
    os << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(yv)
       << "</text>\n";
    const double xv = x0 + (x1 - x0) * i / 4.0;
    const double xd = log_x ? std::pow(10.0, xv) : xv;
    os << "<text x=\"" << px(xd) << "\" y=\"" << H - mb + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
       << fmt(xd) << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* col = colors[k % 5];
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : series[k].second) {
      if (!std::isfinite(y) || (log_x && !(x > 0.0))) continue;
      os << px(x) << ',' << py(y) << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << W - mr - 150 << "\" y=\"" << mt + 16 * (k + 1) << "\" fill=\"" << col
       << "\" font-size=\"12\">" << xml_escape(series[k].first) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void emit_report(ExperimentReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  auto write = [&](const std::string& name, const std::string& body) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    os << body;
    if (!os) throw IoError("write failed for " + path);
    report.artifacts.push_back(path);
  };
  report.artifacts.clear();

  std::vector<std::pair<double, double>> cantor, control;
  std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> margins(3);
  for (std::size_t i = 0; i < report.sweep.size(); ++i) {
    const auto& e = report.sweep[i];
    cantor.emplace_back(e.width, e.probe_min);
    control.emplace_back(e.width, e.control_min);
    for (std::size_t c = 0; c < 3 && c < e.cases.size(); ++c) {
      margins[c].first = "case " + e.cases[c].name;
      margins[c].second.emplace_back(e.width, e.cases[c].min_value);
    }
  }
  write("sweep.csv", sweep_csv(report));
  write("min_vs_width.svg", svg_line_plot("probe minimum of u vs patch width", "width w", "min u",
                                          {{"exceptional set", cantor}, {"control segment", control}}, true));
  if (report.sweep.empty()) margins.clear();
  write("case_margins.svg", svg_line_plot("smallest w on each boundary piece", "width w", "min w", margins, true));

  auto j = report.to_json();
  j["hash"] = report.hash();
  auto paths = report.artifacts;
  paths.push_back((fs::path(dir) / "report.json").string());
  j["artifacts"] = paths;
  write("report.json", j.dump(2) + "\n");
}

}  // namespace exb
