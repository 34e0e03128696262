#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exb/base_barriers.hpp"
#include "exb/cone_barrier.hpp"
#include "exb/exceptional_sets.hpp"
#include "exb/numerics.hpp"
#include "exb/pucci.hpp"

namespace exb {

/// Uniform grid on the box prod_i [lo_i, lo_i + cells_i h], nodes indexed
/// with axis 0 fastest.
struct Grid {
  std::vector<double> lo;
  std::vector<int> cells;
  double h;

  Grid(std::vector<double> lo, std::vector<int> cells, double h);
  /// Cube [a, b]^n with `cells` cells per axis.
  static Grid cube(int n, double a, double b, int cells);

  int dim() const noexcept { return static_cast<int>(lo.size()); }
  int nodes(int axis) const noexcept { return cells[static_cast<std::size_t>(axis)] + 1; }
  std::size_t size() const noexcept;
  double hi(int axis) const noexcept { return lo[static_cast<std::size_t>(axis)] + cells[static_cast<std::size_t>(axis)] * h; }

  std::vector<int> multi_index(std::size_t idx) const;
  std::size_t flat(std::span<const int> mi) const;
  std::vector<double> coords(std::size_t idx) const;
  void coords(std::size_t idx, std::span<double> out) const;
  bool on_boundary(std::size_t idx) const;
  std::size_t stride(int axis) const noexcept;
};

using SpaceFn = std::function<double(std::span<const double>)>;
using SpaceTimeFn = std::function<double(std::span<const double>, double)>;
using DriftFn = std::function<void(std::span<const double>, double, std::span<double>)>;

/// Lower-order terms of -u_t + M+(D^2 u) + b.Du + c u = f. Missing terms are zero.
struct Coefficients {
  DriftFn drift;
  SpaceTimeFn c;
  SpaceTimeFn source;
  double K = 0.0;  // bound on |b_i| used in the step size

  bool has_lower_order() const noexcept { return drift || c || source; }
};

/// Grid, horizon and parabolic-boundary data. dt is the CFL step
/// 0.4 h^2 / (2 n Lambda + K h n), shrunk so that T is a whole number of steps.
struct GridCylinder {
  Grid grid;
  double T;
  double dt;
  int steps;
  SpaceFn initial;
  SpaceTimeFn lateral;

  GridCylinder(Grid grid, double T, const EllipticityPair& ell, double K, SpaceFn initial, SpaceTimeFn lateral);
  static double cfl_step(double h, int n, const EllipticityPair& ell, double K);
};

/// Saved time slabs with per-slab extrema.
struct SpaceTimeField {
  Grid grid;
  std::vector<double> times;
  std::vector<std::vector<double>> slabs;
  std::vector<double> slab_min;
  std::vector<double> slab_max;
  double lambda = 0.0;
  double Lambda = 0.0;
  double dt = 0.0;

  double min() const;
  double max() const;
  void push(double t, std::vector<double> slab);
};

using StepObserver = std::function<void(int step, double t, std::span<const double> slab)>;

struct SolveOptions {
  int save_every = 1;  // 0 keeps only the first and last slab
  StepObserver observer;
};

/// One forward step of u_t = M+(D^2 u) + b.Du + c u - f on interior nodes,
/// then boundary nodes from the lateral data at t + dt. Throws
/// AssumptionViolation if c > 0 is sampled and ConfigError when dt breaks the
/// step-size bound.
void step(const Grid& grid, std::span<const double> u, std::span<double> out, const Coefficients& coeffs,
          const EllipticityPair& ell, double dt, double t, const SpaceTimeFn& lateral);

SpaceTimeField solve(const GridCylinder& cyl, const Coefficients& coeffs, const EllipticityPair& ell,
                     const SolveOptions& opts = {});

/// Central-difference Hessian of a slab at an interior node.
SymMatrix discrete_hessian(const Grid& grid, std::span<const double> u, std::size_t idx);
/// Upwind gradient matching the solver: forward difference where b_i > 0.
std::vector<double> upwind_gradient(const Grid& grid, std::span<const double> u, std::size_t idx,
                                    std::span<const double> b);

struct ComparisonResult {
  bool ok;
  std::size_t slab = 0;
  std::size_t node = 0;
  double excess = 0.0;  // u - v at the witness
};

/// u <= v + 1e-10 on every saved slab.
ComparisonResult check_comparison(const SpaceTimeField& u, const SpaceTimeField& v);

/// Barrier sum for the base-boundary argument:
/// (1 + L/r^2) phi(x - y0, t) + sum_i r_i^s psi(x - y_i, t + r_i^2).
class BaseAuxiliary {
 public:
  BaseAuxiliary(std::vector<double> y0, double L, double r, double beta, BaseBarrierParams psi,
                std::optional<BallCover> cover, double series_exponent, double T);

  double value(std::span<const double> x, double t) const;
  Jet jet(std::span<const double> x, double t) const;
  double series(std::span<const double> x, double t) const;
  /// epsilon t^{-alpha} with epsilon the cover's sum of r_i^s.
  double series_bound(double t) const;
  double phi_weight() const noexcept { return 1.0 + L_ / (r_ * r_); }
  const std::optional<BallCover>& cover() const noexcept { return cover_; }
  const std::vector<std::vector<double>>& centers() const noexcept { return centers_; }

 private:
  std::vector<double> y0_;
  double L_, r_, beta_;
  BaseBarrierParams psi_;
  std::optional<BallCover> cover_;
  double s_;
  std::vector<std::vector<double>> centers_;
  double weight_ = 0.0;  // r_i^s, common to all balls
  double ri2_ = 0.0;
};

/// Barrier sum for the lateral argument:
/// (1 + L/(C1 r^eta)) h^r(x - z0) + sum_i r_i^{mu - delta} h^s(x - z_i) + (L/s^2)(t - t0)^2.
/// Only balls within r + 2 r_i of z0 are kept.
class LateralAuxiliary {
 public:
  LateralAuxiliary(std::vector<double> z0, std::vector<double> axis, double L, double r, double s, double t0,
                   ConeBarrier regular, double C1_regular, ConeBarrier singular, std::optional<BallCover> cover,
                   double series_exponent, double r0);

  double value(std::span<const double> x, double t) const;
  Jet jet(std::span<const double> x, double t) const;
  double series(std::span<const double> x) const;
  /// epsilon C2 dist(x, centers)^{-mu}, using the singular barrier's max of h.
  double series_bound(std::span<const double> x, double C2) const;
  double regular_weight() const noexcept { return reg_weight_; }
  const ConeBarrier& regular() const noexcept { return reg_; }
  const ConeBarrier& singular() const noexcept { return sing_; }
  const std::vector<double>& axis() const noexcept { return axis_; }
  const std::optional<BallCover>& cover() const noexcept { return cover_; }
  const std::vector<std::vector<double>>& centers() const noexcept { return centers_; }
  double weight() const noexcept { return weight_; }

 private:
  std::vector<double> z0_, axis_;
  double L_, r_, s_, t0_;
  ConeBarrier reg_;
  ConeBarrier sing_;
  std::optional<BallCover> cover_;
  double reg_weight_;
  std::vector<std::vector<double>> centers_;
  double weight_ = 0.0;
  double r0_;
};

/// w = u + barrier sum on every saved slab. The base version records, per
/// slab with t > 0, the largest ratio series / (epsilon t^{-alpha}).
SpaceTimeField assemble_base_w(const SpaceTimeField& u, const BaseAuxiliary& aux,
                               std::vector<double>* tail_ratio = nullptr);
/// Nodes where `mask` is false are left as NaN (outside the barrier's cone).
SpaceTimeField assemble_lateral_w(const SpaceTimeField& u, const LateralAuxiliary& aux,
                                  const std::function<bool(std::span<const double>)>& mask = {});

void write_csv(const SpaceTimeField& f, const std::string& path);
/// One JSON header line (dims, lo, cells, h, dt, T, slab count, times) followed by
/// the slabs as little-endian doubles, row-major.
void write_binary(const SpaceTimeField& f, const std::string& path);

}  // namespace exb
