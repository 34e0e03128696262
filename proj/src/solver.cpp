#include "exb/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "exb/error.hpp"
#include "exb/kernels.hpp"

namespace exb {

Grid::Grid(std::vector<double> lo_, std::vector<int> cells_, double h_)
    : lo(std::move(lo_)), cells(std::move(cells_)), h(h_) {
  if (lo.empty() || lo.size() != cells.size() || lo.size() > 3) throw ConfigError("grid needs 1 to 3 axes");
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("grid step must be positive");
  for (int c : cells) {
    if (c < 2) throw ConfigError("grid needs at least 3 nodes per axis");
  }
}

Grid Grid::cube(int n, double a, double b, int cells) {
  if (!(b > a)) throw ConfigError("grid box needs a < b");
  return Grid(std::vector<double>(static_cast<std::size_t>(n), a), std::vector<int>(static_cast<std::size_t>(n), cells),
              (b - a) / cells);
}

std::size_t Grid::size() const noexcept {
  std::size_t s = 1;
  for (int c : cells) s *= static_cast<std::size_t>(c + 1);
  return s;
}

std::size_t Grid::stride(int axis) const noexcept {
  std::size_t s = 1;
  for (int a = 0; a < axis; ++a) s *= static_cast<std::size_t>(cells[static_cast<std::size_t>(a)] + 1);
  return s;
}

std::vector<int> Grid::multi_index(std::size_t idx) const {
  std::vector<int> mi(lo.size());
  for (std::size_t a = 0; a < lo.size(); ++a) {
    const auto m = static_cast<std::size_t>(cells[a] + 1);
    mi[a] = static_cast<int>(idx % m);
    idx /= m;
  }
  return mi;
}

std::size_t Grid::flat(std::span<const int> mi) const {
  std::size_t idx = 0;
  for (std::size_t a = lo.size(); a-- > 0;) idx = idx * static_cast<std::size_t>(cells[a] + 1) + static_cast<std::size_t>(mi[a]);
  return idx;
}

void Grid::coords(std::size_t idx, std::span<double> out) const {
  for (std::size_t a = 0; a < lo.size(); ++a) {
    const auto m = static_cast<std::size_t>(cells[a] + 1);
    out[a] = lo[a] + static_cast<double>(idx % m) * h;
    idx /= m;
  }
}

std::vector<double> Grid::coords(std::size_t idx) const {
  std::vector<double> x(lo.size());
  coords(idx, x);
  return x;
}

bool Grid::on_boundary(std::size_t idx) const {
  for (std::size_t a = 0; a < lo.size(); ++a) {
    const auto m = static_cast<std::size_t>(cells[a] + 1);
    const auto i = idx % m;
    if (i == 0 || i + 1 == m) return true;
    idx /= m;
  }
  return false;
}

double GridCylinder::cfl_step(double h, int n, const EllipticityPair& ell, double K) {
  return 0.4 * h * h / (2.0 * n * ell.Lambda + K * h * n);
}

GridCylinder::GridCylinder(Grid grid_, double T_, const EllipticityPair& ell, double K, SpaceFn initial_,
                           SpaceTimeFn lateral_)
    : grid(std::move(grid_)), T(T_), initial(std::move(initial_)), lateral(std::move(lateral_)) {
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("horizon T must be positive");
  if (!(K >= 0.0)) throw ConfigError("drift bound K must be nonnegative");
  if (!initial) initial = [](std::span<const double>) { return 0.0; };
  if (!lateral) lateral = [](std::span<const double>, double) { return 0.0; };
  const double dmax = cfl_step(grid.h, grid.dim(), ell, K);
  steps = static_cast<int>(std::ceil(T / dmax - 1e-12));
  if (steps < 1) steps = 1;
  dt = T / steps;
}

double SpaceTimeField::min() const {
  return slab_min.empty() ? 0.0 : *std::min_element(slab_min.begin(), slab_min.end());
}

double SpaceTimeField::max() const {
  return slab_max.empty() ? 0.0 : *std::max_element(slab_max.begin(), slab_max.end());
}

void SpaceTimeField::push(double t, std::vector<double> slab) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : slab) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  times.push_back(t);
  slab_min.push_back(lo);
  slab_max.push_back(hi);
  slabs.push_back(std::move(slab));
}

SymMatrix discrete_hessian(const Grid& grid, std::span<const double> u, std::size_t idx) {
  const int n = grid.dim();
  const double ih2 = 1.0 / (grid.h * grid.h);
  const double i4h2 = 0.25 * ih2;
  SymMatrix H(n);
  const double c = u[idx];
  for (int a = 0; a < n; ++a) {
    const std::size_t sa = grid.stride(a);
    H.set(a, a, (u[idx + sa] - 2.0 * c + u[idx - sa]) * ih2);
    for (int b = a + 1; b < n; ++b) {
      const std::size_t sb = grid.stride(b);
      H.set(a, b, (u[idx + sa + sb] - u[idx - sa + sb] - u[idx + sa - sb] + u[idx - sa - sb]) * i4h2);
    }
  }
  return H;
}

std::vector<double> upwind_gradient(const Grid& grid, std::span<const double> u, std::size_t idx,
                                    std::span<const double> b) {
  std::vector<double> g(static_cast<std::size_t>(grid.dim()), 0.0);
  for (int a = 0; a < grid.dim(); ++a) {
    const std::size_t sa = grid.stride(a);
    const double ba = b[static_cast<std::size_t>(a)];
    if (ba > 0.0)
      g[static_cast<std::size_t>(a)] = (u[idx + sa] - u[idx]) / grid.h;
    else if (ba < 0.0)
      g[static_cast<std::size_t>(a)] = (u[idx] - u[idx - sa]) / grid.h;
  }
  return g;
}

void step(const Grid& grid, std::span<const double> u, std::span<double> out, const Coefficients& coeffs,
          const EllipticityPair& ell, double dt, double t, const SpaceTimeFn& lateral) {
  const int n = grid.dim();
  const std::size_t N = grid.size();
  if (u.size() != N || out.size() != N) throw InvalidInput("slab size does not match the grid");
  const double bound = grid.h * grid.h / (2.0 * n * ell.Lambda + coeffs.K * grid.h * n);
  if (!(dt > 0.0) || dt > bound * (1.0 + 1e-12)) {
    throw ConfigError("time step " + std::to_string(dt) + " violates the stability bound " + std::to_string(bound));
  }

  if (n == 2) {
    std::copy(u.begin(), u.end(), out.begin());
    pucci_step_2d({u.data(), out.data(), grid.nodes(0), grid.nodes(1), grid.h, dt, ell.lambda, ell.Lambda});
  } else {
    const PucciOperator mplus(ell, PucciBranch::Plus);
    for (std::size_t idx = 0; idx < N; ++idx) {
      if (grid.on_boundary(idx)) continue;
      out[idx] = u[idx] + dt * mplus(discrete_hessian(grid, u, idx));
    }
  }

  std::vector<double> x(static_cast<std::size_t>(n));
  if (coeffs.has_lower_order()) {
    std::vector<double> b(static_cast<std::size_t>(n), 0.0);
    for (std::size_t idx = 0; idx < N; ++idx) {
      if (grid.on_boundary(idx)) continue;
      grid.coords(idx, x);
      double extra = 0.0;
      if (coeffs.drift) {
        coeffs.drift(x, t, b);
        for (double bi : b) {
          if (!(std::abs(bi) <= coeffs.K * (1.0 + 1e-12))) {
            throw ConfigError("drift exceeds the declared bound K used for the time step");
          }
        }
        extra += dot(b, upwind_gradient(grid, u, idx, b));
      }
      if (coeffs.c) {
        const double cv = coeffs.c(x, t);
        if (cv > 0.0) throw AssumptionViolation("zeroth-order coefficient c > 0 sampled at a grid node");
        if (dt * -cv > 0.5) throw ConfigError("time step too large for the zeroth-order coefficient");
        extra += cv * u[idx];
      }
      if (coeffs.source) extra -= coeffs.source(x, t);
      out[idx] += dt * extra;
    }
  }

  auto set_boundary = [&](std::size_t idx) {
    grid.coords(idx, x);
    out[idx] = lateral(x, t + dt);
  };
  if (n == 2) {
    const auto nx = static_cast<std::size_t>(grid.nodes(0)), ny = static_cast<std::size_t>(grid.nodes(1));
    for (std::size_t i = 0; i < nx; ++i) {
      set_boundary(i);
      set_boundary((ny - 1) * nx + i);
    }
    for (std::size_t j = 1; j + 1 < ny; ++j) {
      set_boundary(j * nx);
      set_boundary(j * nx + nx - 1);
    }
  } else {
    for (std::size_t idx = 0; idx < N; ++idx) {
      if (grid.on_boundary(idx)) set_boundary(idx);
    }
  }
}

SpaceTimeField solve(const GridCylinder& cyl, const Coefficients& coeffs, const EllipticityPair& ell,
                     const SolveOptions& opts) {
  const Grid& g = cyl.grid;
  const std::size_t N = g.size();
  std::vector<double> u(N), next(N);
  std::vector<double> x(static_cast<std::size_t>(g.dim()));
  for (std::size_t idx = 0; idx < N; ++idx) {
    g.coords(idx, x);
    u[idx] = cyl.initial(x);
    if (!std::isfinite(u[idx])) throw ConfigError("initial data is not finite");
  }
  SpaceTimeField f{g, {}, {}, {}, {}, ell.lambda, ell.Lambda, cyl.dt};
  if (opts.observer) opts.observer(0, 0.0, u);
  f.push(0.0, u);
  for (int k = 1; k <= cyl.steps; ++k) {
    const double t = (k - 1) * cyl.dt;
    step(g, u, next, coeffs, ell, cyl.dt, t, cyl.lateral);
    u.swap(next);
    const double tk = k * cyl.dt;
    if (opts.observer) opts.observer(k, tk, u);
    const bool keep = opts.save_every > 0 ? (k % opts.save_every == 0) : false;
    if (keep || k == cyl.steps) f.push(tk, u);
  }
  return f;
}

ComparisonResult check_comparison(const SpaceTimeField& u, const SpaceTimeField& v) {
  if (u.slabs.size() != v.slabs.size() || u.grid.size() != v.grid.size()) {
    throw InvalidInput("comparison needs fields on the same grid and slabs");
  }
  ComparisonResult res{true};
  for (std::size_t k = 0; k < u.slabs.size(); ++k) {
    for (std::size_t i = 0; i < u.slabs[k].size(); ++i) {
      const double d = u.slabs[k][i] - v.slabs[k][i];
      if (d > 1e-10) return {false, k, i, d};
    }
  }
  return res;
}

namespace {

std::vector<std::vector<double>> materialise_centers(const std::optional<BallCover>& cover) {
  std::vector<std::vector<double>> cs;
  if (!cover) return cs;
  if (cover->level() > 20) throw ConfigError("cover too fine to sum explicitly (more than 2^20 balls)");
  for (std::uint64_t i = 0; i < cover->count(); ++i) cs.push_back(cover->center(i));
  return cs;
}

double phi_value(std::span<const double> x, double t, double beta) {
  const double x2 = dot(x, x);
  if (t == 0.0) return x2;
  return std::pow(t, 1.0 - beta) + (1.0 + std::pow(t, beta)) * x2;
}

void add_scaled(Jet& acc, const Jet& j, double w) {
  acc.value += w * j.value;
  for (std::size_t i = 0; i < acc.gradient.size(); ++i) acc.gradient[i] += w * j.gradient[i];
  acc.hessian += w * j.hessian;
  acc.dt += w * j.dt;
}

}  // namespace

BaseAuxiliary::BaseAuxiliary(std::vector<double> y0, double L, double r, double beta, BaseBarrierParams psi,
                             std::optional<BallCover> cover, double series_exponent, double T)
    : y0_(std::move(y0)), L_(L), r_(r), beta_(beta), psi_(psi), cover_(std::move(cover)), s_(series_exponent) {
  if (!(L > 0.0) || !(r > 0.0)) throw ConfigError("L and r must be positive");
  centers_ = materialise_centers(cover_);
  if (cover_) {
    weight_ = std::pow(cover_->radius(0), s_);
    ri2_ = cover_->radius(0) * cover_->radius(0);
    if (!(r + ri2_ < T)) throw ConfigError("shifted barriers leave their horizon: r + r_i^2 >= T");
  }
}

double BaseAuxiliary::series(std::span<const double> x, double t) const {
  double s = 0.0;
  std::vector<double> d(x.size());
  for (const auto& c : centers_) {
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - c[i];
    s += weight_ * std::pow(t + ri2_, -psi_.alpha) * std::exp(-psi_.sigma * dot(d, d) / (t + ri2_));
  }
  return s;
}

double BaseAuxiliary::series_bound(double t) const {
  return static_cast<double>(centers_.size()) * weight_ * std::pow(t, -psi_.alpha);
}

double BaseAuxiliary::value(std::span<const double> x, double t) const {
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y0_[i];
  return phi_weight() * phi_value(d, t, beta_) + series(x, t);
}

Jet BaseAuxiliary::jet(std::span<const double> x, double t) const {
  const int n = static_cast<int>(x.size());
  Jet acc;
  acc.gradient.assign(x.size(), 0.0);
  acc.hessian = SymMatrix(n);
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y0_[i];
  add_scaled(acc, eval_phi(d, t, beta_).jet, phi_weight());
  for (const auto& c : centers_) {
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - c[i];
    add_scaled(acc, eval_psi(d, t + ri2_, psi_), weight_);
  }
  return acc;
}

LateralAuxiliary::LateralAuxiliary(std::vector<double> z0, std::vector<double> axis, double L, double r, double s,
                                   double t0, ConeBarrier regular, double C1_regular, ConeBarrier singular,
                                   std::optional<BallCover> cover, double series_exponent, double r0)
    : z0_(std::move(z0)),
      axis_(std::move(axis)),
      L_(L),
      r_(r),
      s_(s),
      t0_(t0),
      reg_(std::move(regular)),
      sing_(std::move(singular)),
      cover_(std::move(cover)),
      r0_(r0) {
  if (!(L > 0.0) || !(r > 0.0) || !(s > 0.0) || !(C1_regular > 0.0)) {
    throw ConfigError("L, r, s and C1 must be positive");
  }
  if (reg_.kind() != BarrierKind::Regular || sing_.kind() != BarrierKind::Singular) {
    throw ConfigError("lateral auxiliary needs one regular and one singular barrier");
  }
  reg_weight_ = 1.0 + L / (C1_regular * std::pow(r, reg_.alpha()));
  // Balls that cannot meet B_r(z0) play no part in the argument.
  for (auto& c : materialise_centers(cover_)) {
    std::vector<double> d(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) d[i] = c[i] - z0_[i];
    if (norm(d) < r + 2.0 * cover_->radius(0)) centers_.push_back(std::move(c));
  }
  if (cover_) weight_ = std::pow(cover_->radius(0), series_exponent);
}

double LateralAuxiliary::series(std::span<const double> x) const {
  double s = 0.0;
  std::vector<double> d(x.size());
  for (const auto& c : centers_) {
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - c[i];
    const double dn = norm(d);
    if (dn >= r0_) throw ConfigError("evaluation point outside the barrier family radius r0");
    if (dn == 0.0) return std::numeric_limits<double>::infinity();
    s += weight_ * sing_.value(d, axis_);
  }
  return s;
}

double LateralAuxiliary::series_bound(std::span<const double> x, double C2) const {
  if (!cover_) return 0.0;
  const double dist = cantor_distance(cover_->spec(), 40, x);
  return static_cast<double>(centers_.size()) * weight_ * C2 * std::pow(dist, sing_.alpha());
}

double LateralAuxiliary::value(std::span<const double> x, double t) const {
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - z0_[i];
  const double reg = norm(d) == 0.0 ? 0.0 : reg_.value(d, axis_);
  return reg_weight_ * reg + series(x) + L_ / (s_ * s_) * (t - t0_) * (t - t0_);
}

Jet LateralAuxiliary::jet(std::span<const double> x, double t) const {
  const int n = static_cast<int>(x.size());
  Jet acc;
  acc.gradient.assign(x.size(), 0.0);
  acc.hessian = SymMatrix(n);
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - z0_[i];
  add_scaled(acc, reg_.eval(d, axis_), reg_weight_);
  for (const auto& c : centers_) {
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - c[i];
    if (norm(d) >= r0_) throw ConfigError("evaluation point outside the barrier family radius r0");
    add_scaled(acc, sing_.eval(d, axis_), weight_);
  }
  acc.value += L_ / (s_ * s_) * (t - t0_) * (t - t0_);
  acc.dt += 2.0 * L_ / (s_ * s_) * (t - t0_);
  return acc;
}

SpaceTimeField assemble_base_w(const SpaceTimeField& u, const BaseAuxiliary& aux, std::vector<double>* tail_ratio) {
  SpaceTimeField w{u.grid, {}, {}, {}, {}, u.lambda, u.Lambda, u.dt};
  std::vector<double> x(static_cast<std::size_t>(u.grid.dim()));
  if (tail_ratio) tail_ratio->clear();
  for (std::size_t k = 0; k < u.slabs.size(); ++k) {
    const double t = u.times[k];
    std::vector<double> slab(u.slabs[k].size());
    double worst = 0.0;
    for (std::size_t i = 0; i < slab.size(); ++i) {
      u.grid.coords(i, x);
      slab[i] = u.slabs[k][i] + aux.value(x, t);
      if (tail_ratio && t > 0.0 && aux.cover()) worst = std::max(worst, aux.series(x, t) / aux.series_bound(t));
    }
    if (tail_ratio) tail_ratio->push_back(worst);
    w.push(t, std::move(slab));
  }
  return w;
}

SpaceTimeField assemble_lateral_w(const SpaceTimeField& u, const LateralAuxiliary& aux,
                                  const std::function<bool(std::span<const double>)>& mask) {
  SpaceTimeField w{u.grid, {}, {}, {}, {}, u.lambda, u.Lambda, u.dt};
  std::vector<double> x(static_cast<std::size_t>(u.grid.dim()));
  for (std::size_t k = 0; k < u.slabs.size(); ++k) {
    std::vector<double> slab(u.slabs[k].size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < slab.size(); ++i) {
      u.grid.coords(i, x);
      if (mask && !mask(x)) continue;
      slab[i] = u.slabs[k][i] + aux.value(x, u.times[k]);
    }
    w.times.push_back(u.times[k]);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : slab) {
      if (std::isnan(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    w.slab_min.push_back(lo);
    w.slab_max.push_back(hi);
    w.slabs.push_back(std::move(slab));
  }
  return w;
}

void write_csv(const SpaceTimeField& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  const int n = f.grid.dim();
  for (int a = 0; a < n; ++a) os << 'x' << a << ',';
  os << "t,value\n";
  std::vector<double> x(static_cast<std::size_t>(n));
  char buf[64];
  for (std::size_t k = 0; k < f.slabs.size(); ++k) {
    for (std::size_t i = 0; i < f.slabs[k].size(); ++i) {
      f.grid.coords(i, x);
      for (double v : x) {
        std::snprintf(buf, sizeof buf, "%.12g,", v);
        os << buf;
      }
      std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", f.times[k], f.slabs[k][i]);
      os << buf;
    }
  }
  if (!os) throw IoError("write failed for " + path);
}

void write_binary(const SpaceTimeField& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  nlohmann::json hdr;
  hdr["dims"] = f.grid.dim();
  hdr["lo"] = f.grid.lo;
  hdr["cells"] = f.grid.cells;
  hdr["h"] = f.grid.h;
  hdr["dt"] = f.dt;
  hdr["T"] = f.times.empty() ? 0.0 : f.times.back();
  hdr["slabs"] = f.slabs.size();
  hdr["times"] = f.times;
  os << hdr.dump() << '\n';
  for (const auto& s : f.slabs) os.write(reinterpret_cast<const char*>(s.data()), static_cast<std::streamsize>(s.size() * sizeof(double)));
  if (!os) throw IoError("write failed for " + path);
}

}  // namespace exb
