#include "exb/exceptional_sets.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "exb/error.hpp"
#include "exb/numerics.hpp"

namespace exb {

double hausdorff_normalizer(double s) {
  if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("Hausdorff normaliser needs s >= 0");
  return std::pow(std::numbers::pi, s / 2.0) / std::tgamma(s / 2.0 + 1.0);
}

void CantorSpec::validate() const {
  if (!(ratio > 0.0 && ratio < 0.5)) throw ParameterError("Cantor ratio must lie in (0, 1/2)");
  if (!(b > a)) throw ParameterError("Cantor interval needs a < b");
  if (level < 0 || level > 62) throw ParameterError("Cantor level must lie in [0, 62]");
  if (origin.empty() || origin.size() != direction.size() || origin.size() > static_cast<std::size_t>(kMaxDim)) {
    throw ParameterError("Cantor embedding needs origin and direction of equal dimension");
  }
  if (std::abs(norm(direction) - 1.0) > 1e-12) throw ParameterError("Cantor embedding direction must be a unit vector");
}

double CantorSpec::dimension() const { return std::log(2.0) / std::log(1.0 / ratio); }

double CantorSpec::interval_length(int m) const { return (b - a) * std::pow(ratio, m); }

double CantorSpec::interval_start(int m, std::uint64_t i) const {
  double s = a;
  double len = b - a;
  for (int j = m - 1; j >= 0; --j) {
    if ((i >> j) & 1U) s += (1.0 - ratio) * len;
    len *= ratio;
  }
  return s;
}

std::vector<double> CantorSpec::embed(double u) const {
  std::vector<double> x(origin);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += u * direction[i];
  return x;
}

CantorSet generate_cantor(const CantorSpec& spec) {
  spec.validate();
  if (spec.level > 24) throw ParameterError("refusing to materialise more than 2^24 Cantor intervals");
  CantorSet set;
  const double len = spec.interval_length(spec.level);
  const std::uint64_t count = std::uint64_t{1} << spec.level;
  set.intervals.reserve(count);
  set.points.reserve(2 * count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const double s = spec.interval_start(spec.level, i);
    set.intervals.emplace_back(s, s + len);
    set.points.push_back(spec.embed(s));
    set.points.push_back(spec.embed(s + len));
  }
  return set;
}

namespace {

struct Projection {
  double u;
  double perp2;
};

Projection project(const CantorSpec& spec, std::span<const double> x) {
  if (x.size() != spec.origin.size()) throw InvalidInput("point dimension does not match the Cantor embedding");
  double u = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) u += (x[i] - spec.origin[i]) * spec.direction[i];
  // Residual taken componentwise; |x - o|^2 - u^2 cancels near the segment.
  double perp2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = x[i] - spec.origin[i] - u * spec.direction[i];
    perp2 += e * e;
  }
  return {u, perp2};
}

double segment_distance(double u, double s, double len) {
  if (u < s) return s - u;
  if (u > s + len) return u - s - len;
  return 0.0;
}

double distance_1d(const CantorSpec& spec, int m, double u) {
  double s = spec.a;
  double len = spec.b - spec.a;
  for (int j = 0; j < m; ++j) {
    if (u <= s || u >= s + len) break;
    const double left_end = s + spec.ratio * len;
    const double right_start = s + (1.0 - spec.ratio) * len;
    if (u > left_end && u < right_start) return std::min(u - left_end, right_start - u);
    if (u >= right_start) s = right_start;
    len *= spec.ratio;
  }
  return segment_distance(u, s, len);
}

// Any center whose distance to (u, perp) is below R, searching the Cantor tree.
bool near_center(const CantorSpec& spec, int m, double u, double perp2, double R, double s, double len, int depth) {
  const double du = segment_distance(u, s, len);
  if (du * du + perp2 >= R * R) return false;
  if (depth == m) {
    const double c = s + spec.ratio * len;
    return (u - c) * (u - c) + perp2 < R * R;
  }
  const double child = spec.ratio * len;
  return near_center(spec, m, u, perp2, R, s, child, depth + 1) ||
         near_center(spec, m, u, perp2, R, s + (1.0 - spec.ratio) * len, child, depth + 1);
}

}  // namespace

double cantor_distance(const CantorSpec& spec, int m, std::span<const double> x) {
  const Projection p = project(spec, x);
  const double d = distance_1d(spec, m, p.u);
  return std::sqrt(d * d + p.perp2);
}

BallCover::BallCover(CantorSpec spec, int level, double mu, double epsilon, double nu)
    : spec_(std::move(spec)), level_(level), mu_(mu), epsilon_(epsilon), nu_(nu) {
  spec_.validate();
  if (level < 0 || level > 62) throw ParameterError("cover level must lie in [0, 62]");
  radius_ = spec_.interval_length(level);
}

double BallCover::center_param(std::uint64_t i) const {
  return spec_.interval_start(level_, i) + spec_.ratio * radius_;
}

std::vector<double> BallCover::center(std::uint64_t i) const { return spec_.embed(center_param(i)); }

double BallCover::sum_power() const { return sum_power(mu_); }

double BallCover::sum_power(double exponent) const {
  const double term = std::pow(radius_, exponent);
  if (level_ <= 16) {
    double s = 0.0;
    for (std::uint64_t i = 0; i < count(); ++i) s += std::pow(radius(i), exponent);
    return s;
  }
  return std::ldexp(term, level_);
}

bool BallCover::contains(std::span<const double> x) const {
  const Projection p = project(spec_, x);
  return near_center(spec_, level_, p.u, p.perp2, radius_, spec_.a, spec_.b - spec_.a, 0);
}

BallCover build_cover(const CantorSpec& spec, double mu, double epsilon, double nu) {
  spec.validate();
  const double dim = spec.dimension();
  if (!(mu > dim)) {
    throw ParameterError("covering exponent " + std::to_string(mu) + " must exceed the set's dimension " +
                         std::to_string(dim));
  }
  if (!(epsilon > 0.0) || !(nu > 0.0)) throw ParameterError("epsilon and nu must be positive");
  const double log_eps = std::log(epsilon);
  for (int m = spec.level; m <= 62; ++m) {
    const double r = spec.interval_length(m);
    const double log_sum = m * std::log(2.0) + mu * std::log(r);
    if (log_sum < log_eps && r <= nu) return BallCover(spec, m, mu, epsilon, nu);
  }
  throw ParameterError("no cover level up to 62 meets the sum and radius targets");
}

BallCover cover_at_level(const CantorSpec& spec, int level, double mu, double nu) {
  BallCover probe(spec, level, mu, 0.0, nu);
  if (probe.radius(0) > nu) throw ParameterError("cover radius exceeds the cap nu");
  return BallCover(spec, level, mu, probe.sum_power(), nu);
}

bool paraboloid_membership(const ParaboloidCover& cover, std::span<const double> x, double t) {
  const BallCover& b = cover.base;
  const double r = b.radius(0);
  if (t >= r * r) return false;
  const double R = std::sqrt(r * r - t);
  const Projection p = project(b.spec(), x);
  return near_center(b.spec(), b.level(), p.u, p.perp2, R, b.spec().a, b.spec().b - b.spec().a, 0);
}

CoverParameters choose_cover_parameters(const EllipticityPair& ell, double dimE, double c, double alpha, double L,
                                        double r, double T) {
  const double ratio = ell.ratio();
  if (!(dimE >= 0.0 && dimE < ratio)) throw ParameterError("need dim E < lambda/Lambda");
  if (!(c > 0.0) || !(L > 0.0) || !(r > 0.0) || !(alpha > 0.0)) {
    throw ParameterError("cover constants c, L, r, alpha must be positive");
  }
  const double delta = (ratio - dimE) / 2.0;
  const double exponent = ratio - delta - 2.0 * alpha;
  if (!(exponent < 0.0)) {
    throw ParameterError("constraint c nu^{exponent} > L unattainable: exponent lambda/Lambda - delta - 2 alpha = " +
                         std::to_string(exponent) + " is not negative");
  }
  if (!(r < T)) throw ParameterError("constraint r + nu^2 < T unattainable: r >= T");
  for (int k = 1; k <= 1000; ++k) {
    const double nu = std::ldexp(1.0, -k);
    const bool below_r = nu < r;
    const bool fits = r + nu * nu < T;
    const bool large = std::log(c) - exponent * k * std::log(2.0) > std::log(L);
    if (below_r && fits && large) return {delta, exponent, nu, k};
  }
  throw ParameterError("no dyadic nu >= 2^-1000 satisfies c nu^{exponent} > L");
}

}  // namespace exb
