#include <doctest.h>

#include <cmath>
#include <random>

#include "../oracles.hpp"
#include "exb/error.hpp"
#include "exb/exceptional_sets.hpp"

using namespace exb;

namespace {

CantorSpec unit_cantor(int level = 0) {
  CantorSpec s;
  s.level = level;
  s.origin = {0.0, 0.0};
  s.direction = {1.0, 0.0};
  return s;
}

// Smallest m with 2^m len^mu rho^{m mu} < eps and len rho^m <= nu, by direct long double evaluation.
int level_oracle(double len, double rho, double mu, double eps, double nu, int start) {
  for (int m = start;; ++m) {
    const long double r = static_cast<long double>(len) * std::pow(static_cast<long double>(rho), m);
    const long double sum = std::pow(2.0L, m) * std::pow(r, static_cast<long double>(mu));
    if (sum < eps && r <= nu) return m;
  }
}

double brute_distance(const std::vector<std::pair<double, double>>& iv, double x, double y) {
  double best = INFINITY;
  for (auto [l, r] : iv) {
    const double dx = x < l ? l - x : (x > r ? x - r : 0.0);
    best = std::min(best, std::hypot(dx, y));
  }
  return best;
}

}  // namespace

TEST_CASE("Hausdorff normaliser agrees with Stirling and known values") {
  CHECK(hausdorff_normalizer(0.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(hausdorff_normalizer(1.0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(hausdorff_normalizer(2.0) == doctest::Approx(std::numbers::pi).epsilon(1e-14));
  CHECK(hausdorff_normalizer(3.0) == doctest::Approx(4.0 * std::numbers::pi / 3.0).epsilon(1e-14));
  for (double s : {0.25, 0.6309, 1.5, 2.7, 5.0})
    CHECK(hausdorff_normalizer(s) == doctest::Approx(oracle::hausdorff_normalizer(s)).epsilon(1e-12));
}

TEST_CASE("Cantor geometry") {
  const CantorSpec s = unit_cantor(3);
  CHECK_NOTHROW(s.validate());
  CHECK(s.dimension() == doctest::Approx(std::log(2.0) / std::log(3.0)).epsilon(1e-15));
  const auto ref = oracle::cantor_intervals(0.0, 1.0, 1.0 / 3.0, 3);
  const CantorSet set = generate_cantor(s);
  REQUIRE(set.intervals.size() == ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    CHECK(set.intervals[i].first == doctest::Approx(ref[i].first).epsilon(1e-14));
    CHECK(set.intervals[i].second == doctest::Approx(ref[i].second).epsilon(1e-14));
    CHECK(s.interval_start(3, i) == doctest::Approx(ref[i].first).epsilon(1e-14));
  }

  CantorSpec bad = unit_cantor();
  bad.ratio = 0.5;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = unit_cantor();
  bad.b = bad.a;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = unit_cantor();
  bad.level = -1;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("distance to a level-m approximation matches brute force") {
  const CantorSpec s = unit_cantor();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (int m : {0, 2, 5, 9}) {
    const auto iv = oracle::cantor_intervals(0.0, 1.0, 1.0 / 3.0, m);
    for (int k = 0; k < 200; ++k) {
      const std::vector<double> x{u(rng), 0.1 * u(rng)};
      CHECK(std::abs(cantor_distance(s, m, x) - brute_distance(iv, x[0], x[1])) < 1e-14);
    }
  }
}

TEST_CASE("cover level for rho = 1/3, mu = 0.7, eps = 0.1") {
  const CantorSpec s = unit_cantor();
  const BallCover c = build_cover(s, 0.7, 0.1, 1.0);
  const int ref = level_oracle(1.0, 1.0 / 3.0, 0.7, 0.1, 1.0, 0);
  CHECK(ref == 31);
  CHECK(c.level() == ref);
  CHECK(c.sum_power() < 0.1);
  CHECK(c.sum_power() == doctest::Approx(std::exp2(31.0) * std::pow(std::pow(3.0, -31.0), 0.7)).epsilon(1e-12));
}

TEST_CASE("radius cap drives the level") {
  const CantorSpec s = unit_cantor();
  const double nu = std::pow(3.0, -40.0);
  const BallCover c = build_cover(s, 0.7, 0.1, nu);
  CHECK(c.level() == level_oracle(1.0, 1.0 / 3.0, 0.7, 0.1, nu, 0));
  CHECK(c.radius(0) <= nu);
  CHECK(c.level() >= 40);
  CHECK(c.level() <= 41);
}

TEST_CASE("cover level is monotone in epsilon and rejects mu <= dim") {
  const CantorSpec s = unit_cantor();
  int prev = 0;
  for (double eps : {1.0, 0.3, 0.1, 0.03, 0.01}) {
    const int m = build_cover(s, 0.8, eps, 1.0).level();
    CHECK(m >= prev);
    CHECK(m == level_oracle(1.0, 1.0 / 3.0, 0.8, eps, 1.0, 0));
    prev = m;
  }
  CHECK_THROWS_AS(build_cover(s, 0.5, 0.1, 1.0), ParameterError);
  CHECK_THROWS_AS(build_cover(s, 0.7, 0.0, 1.0), ParameterError);
}

TEST_CASE("ball centres lie on the set and balls cover it") {
  const CantorSpec s = unit_cantor();
  const BallCover c = cover_at_level(s, 6, 0.7, 1.0);
  const auto iv = oracle::cantor_intervals(0.0, 1.0, 1.0 / 3.0, 6);
  REQUIRE(c.count() == iv.size());
  const double len = std::pow(3.0, -6.0);
  CHECK(c.radius(0) == doctest::Approx(len).epsilon(1e-14));
  CHECK(c.sum_power() == doctest::Approx(64.0 * std::pow(len, 0.7)).epsilon(1e-12));
  CHECK(c.epsilon() == doctest::Approx(c.sum_power()).epsilon(1e-14));
  for (std::size_t i = 0; i < iv.size(); ++i) {
    CHECK(c.center_param(i) == doctest::Approx(iv[i].first + len / 3.0).epsilon(1e-13));
    const auto x = c.center(i);
    CHECK(x[1] == 0.0);
  }
  // Every point of the level-8 approximation is inside some ball.
  for (auto [l, r] : oracle::cantor_intervals(0.0, 1.0, 1.0 / 3.0, 8)) {
    const std::vector<double> a{l, 0.0}, b{r, 0.0};
    CHECK(c.contains(a));
    CHECK(c.contains(b));
  }
}

TEST_CASE("containment against brute force") {
  const CantorSpec s = unit_cantor();
  const BallCover c = cover_at_level(s, 5, 0.7, 1.0);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-0.1, 1.1);
  for (int k = 0; k < 2000; ++k) {
    const std::vector<double> x{u(rng), 0.02 * u(rng)};
    bool ref = false;
    for (std::uint64_t i = 0; i < c.count(); ++i) {
      const auto y = c.center(i);
      if (std::hypot(x[0] - y[0], x[1] - y[1]) < c.radius(i)) ref = true;
    }
    CHECK(c.contains(x) == ref);
  }
}

TEST_CASE("paraboloid membership against brute force") {
  const CantorSpec s = unit_cantor();
  const ParaboloidCover p{cover_at_level(s, 4, 0.7, 1.0)};
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-0.1, 1.1);
  const double r = p.base.radius(0);
  std::uniform_real_distribution<double> tt(-r * r, r * r);
  for (int k = 0; k < 2000; ++k) {
    const std::vector<double> x{u(rng), 0.02 * u(rng)};
    const double t = tt(rng);
    bool ref = false;
    for (std::uint64_t i = 0; i < p.base.count(); ++i) {
      const auto y = p.base.center(i);
      const double d2 = (x[0] - y[0]) * (x[0] - y[0]) + (x[1] - y[1]) * (x[1] - y[1]);
      if (d2 + t < r * r) ref = true;
    }
    CHECK(paraboloid_membership(p, x, t) == ref);
    // At t = 0 the paraboloids meet the balls.
    CHECK(paraboloid_membership(p, x, 0.0) == p.base.contains(x));
  }
}

TEST_CASE("cover parameters against direct constraint search") {
  const EllipticityPair ell(0.07, 0.1);
  const double dim = std::log(2.0) / std::log(3.0);
  const double c = 0.227, alpha = 0.3457, L = 0.2, r = 0.09, T = 0.1;
  const CoverParameters p = choose_cover_parameters(ell, dim, c, alpha, L, r, T);
  const double delta = (0.7 - dim) / 2.0;
  CHECK(p.delta == doctest::Approx(delta).epsilon(1e-14));
  CHECK(p.exponent == doctest::Approx(0.7 - delta - 2 * alpha).epsilon(1e-14));
  int k = 1;
  for (;; ++k) {
    const double nu = std::ldexp(1.0, -k);
    if (nu < r && r + nu * nu < T && c * std::pow(nu, p.exponent) > L) break;
  }
  CHECK(p.nu_log2 == k);
  CHECK(p.nu == std::ldexp(1.0, -k));
  CHECK(p.nu == 1.0 / 16.0);

  CHECK_THROWS_AS(choose_cover_parameters(ell, 0.75, c, alpha, L, r, T), ParameterError);
  CHECK_THROWS_AS(choose_cover_parameters(ell, dim, c, 0.01, L, r, T), ParameterError);
  CHECK_THROWS_AS(choose_cover_parameters(ell, dim, c, alpha, L, 0.2, T), ParameterError);
}
