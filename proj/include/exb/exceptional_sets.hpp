#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "exb/pucci.hpp"

namespace exb {

/// alpha(s) = pi^{s/2} / Gamma(s/2 + 1), the normalising constant of the
/// s-dimensional Hausdorff measure.
double hausdorff_normalizer(double s);

/// Middle-interval Cantor set on [a, b], placed in R^n along the segment
/// origin + u * direction, u in [a, b]. `direction` must be a unit vector.
struct CantorSpec {
  double ratio = 1.0 / 3.0;
  int level = 0;
  double a = 0.0;
  double b = 1.0;
  std::vector<double> origin{0.0};
  std::vector<double> direction{1.0};

  /// Throws ParameterError on ratio outside (0, 1/2), b <= a, level < 0 or a
  /// malformed embedding.
  void validate() const;
  int embed_dim() const noexcept { return static_cast<int>(origin.size()); }
  double dimension() const;
  double length() const noexcept { return b - a; }
  /// Interval length at refinement level m: (b - a) ratio^m.
  double interval_length(int m) const;
  /// Left end (in the parameter u) of the i-th level-m interval, i < 2^m.
  double interval_start(int m, std::uint64_t i) const;
  std::vector<double> embed(double u) const;
};

struct CantorSet {
  std::vector<std::pair<double, double>> intervals;  // parameter intervals at spec.level
  std::vector<std::vector<double>> points;            // embedded interval endpoints (points of E)
};

CantorSet generate_cantor(const CantorSpec& spec);

/// Distance from x to the level-m approximation (union of 2^m closed segments).
double cantor_distance(const CantorSpec& spec, int m, std::span<const double> x);

/// One ball per level-m interval, all of radius interval_length(m), centred at
/// the right end of the interval's left child (a point of the Cantor set).
/// Balls are generated on demand; 2^m may be far too many to store.
class BallCover {
 public:
  BallCover(CantorSpec spec, int level, double mu, double epsilon, double nu);

  const CantorSpec& spec() const noexcept { return spec_; }
  int level() const noexcept { return level_; }
  std::uint64_t count() const noexcept { return std::uint64_t{1} << level_; }
  double mu() const noexcept { return mu_; }
  double epsilon() const noexcept { return epsilon_; }
  double nu() const noexcept { return nu_; }

  double radius(std::uint64_t) const noexcept { return radius_; }
  std::vector<double> center(std::uint64_t i) const;
  double center_param(std::uint64_t i) const;

  /// Sum of radius^mu over all balls.
  double sum_power() const;
  /// Same sum with an arbitrary exponent.
  double sum_power(double exponent) const;
  /// Whether some ball contains x (open balls).
  bool contains(std::span<const double> x) const;

 private:
  CantorSpec spec_;
  int level_;
  double mu_;
  double epsilon_;
  double nu_;
  double radius_;
};

/// Smallest m >= spec.level with 2^m r_m^mu < epsilon and r_m <= nu.
/// Throws ParameterError when mu <= dim E.
BallCover build_cover(const CantorSpec& spec, double mu, double epsilon, double nu);

/// Cover at a prescribed level, with epsilon set to the resulting sum.
BallCover cover_at_level(const CantorSpec& spec, int level, double mu, double nu);

/// P_i = {(x, t) : |x - y_i|^2 + t < r_i^2}.
struct ParaboloidCover {
  BallCover base;
};

/// Membership in the union of the paraboloids, pruning by the Cantor tree.
bool paraboloid_membership(const ParaboloidCover& cover, std::span<const double> x, double t);

struct CoverParameters {
  double delta;
  double exponent;  // lambda/Lambda - delta - 2 alpha
  double nu;
  int nu_log2;      // nu = 2^{-nu_log2}
};

/// delta = (lambda/Lambda - dimE)/2 and the largest dyadic nu with nu < r,
/// r + nu^2 < T and c nu^{exponent} > L.
CoverParameters choose_cover_parameters(const EllipticityPair& ell, double dimE, double c, double alpha, double L,
                                        double r, double T);

}  // namespace exb
