#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "../oracles.hpp"
#include "exb/cone_barrier.hpp"
#include "exb/error.hpp"

using namespace exb;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> fd_spectrum(const ScalarField& f, std::span<const double> x) {
  const SymMatrix H = fd_hessian(f, x);
  const int n = H.dim();
  oracle::Mat a(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a[i][j] = H(i, j);
  return oracle::eigenvalues(a);
}

// Shared across test cases: each build takes close to a second.
const ConeBarrier& regular_barrier() {
  static const ConeBarrier b = build_cone_barrier(0.75 * kPi, EllipticityPair(0.5, 1.0), 2, BarrierKind::Regular);
  return b;
}
const ConeBarrier& singular_barrier() {
  static const ConeBarrier b = build_cone_barrier(0.75 * kPi, EllipticityPair(0.5, 1.0), 2, BarrierKind::Singular);
  return b;
}

}  // namespace

TEST_CASE("axisymmetric spectrum matches a finite-difference oracle") {
  // v = r^a (cos theta + 0.3 cos^2 theta) about e_n.
  const double a = 0.7;
  for (int n = 2; n <= 4; ++n) {
    const ScalarField v = [&](std::span<const double> y) {
      const double r = norm(y), c = y[static_cast<std::size_t>(n - 1)] / r;
      return std::pow(r, a) * (c + 0.3 * c * c);
    };
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    x[0] = 0.5;
    x[static_cast<std::size_t>(n - 1)] = 0.7;
    const double r = norm(x), th = std::acos(x[static_cast<std::size_t>(n - 1)] / r);
    const double c = std::cos(th), s = std::sin(th);
    const double h = c + 0.3 * c * c, dh = -s - 0.6 * c * s, ddh = -c - 0.6 * (c * c - s * s);
    const double ra = std::pow(r, a);
    const auto got = axisym_hessian_spectrum(a * ra / r * h, ra * dh, a * (a - 1) * ra / (r * r) * h, a * ra / r * dh,
                                             ra * ddh, r, th, n);
    const auto ref = fd_spectrum(v, x);
    for (int k = 0; k < n; ++k) CHECK(got[static_cast<std::size_t>(k)] == doctest::Approx(ref[k]).epsilon(1e-6));
  }
}

TEST_CASE("regular and singular barriers build and certify") {
  const EllipticityPair ell(0.5, 1.0);
  const auto& reg = regular_barrier();
  const auto& sing = singular_barrier();
  CHECK(reg.kind() == BarrierKind::Regular);
  CHECK(sing.kind() == BarrierKind::Singular);
  CHECK(reg.alpha() > 0.0);
  CHECK(sing.alpha() < 0.0);
  CHECK(reg.eta() > 0.0);
  CHECK(sing.eta() > 0.0);
  CHECK(sing.mu_bound() >= -sing.alpha());
  CHECK(reg.profile(0.0).h == doctest::Approx(1.0));

  // Homogeneity: the certified eta does not depend on the radius.
  for (const auto* b : {&reg, &sing}) {
    const std::vector<double> r1{1e-3}, r2{0.5}, r3{37.0};
    const double e1 = certify_cone_barrier(*b, ell, {}, r1).eta;
    const double e2 = certify_cone_barrier(*b, ell, {}, r2).eta;
    const double e3 = certify_cone_barrier(*b, ell, {}, r3).eta;
    CHECK(std::abs(e1 - e2) <= 1e-10 * e2);
    CHECK(std::abs(e3 - e2) <= 1e-10 * e2);
  }
}

TEST_CASE("Cartesian jet agrees with finite differences for a tilted axis") {
  const auto& b = regular_barrier();
  const std::vector<double> axis{std::sqrt(0.5), std::sqrt(0.5)};
  const std::vector<double> y{0.1, 0.3};
  const Jet j = b.eval(y, axis);
  const ScalarField f = [&](std::span<const double> p) { return b.value(p, axis); };
  CHECK(j.value == doctest::Approx(f(y)).epsilon(1e-14));
  const SymMatrix H = fd_hessian(f, y);
  const auto g = fd_gradient(f, y);
  for (int i = 0; i < 2; ++i) {
    CHECK(j.gradient[static_cast<std::size_t>(i)] == doctest::Approx(g[static_cast<std::size_t>(i)]).epsilon(1e-6));
    for (int k = 0; k < 2; ++k) CHECK(j.hessian(i, k) == doctest::Approx(H(i, k)).epsilon(1e-5));
  }
  // M+ of the Cartesian Hessian reproduces the polar spectrum.
  const auto ev = sym_eigenvalues(j.hessian);
  const double r = norm(y);
  const double th = std::acos(dot(y, axis) / r);
  const auto sp = b.hessian_spectrum(r, th);
  for (std::size_t k = 0; k < 2; ++k) CHECK(ev[k] == doctest::Approx(sp[k]).epsilon(1e-10));
}

TEST_CASE("three-dimensional barrier evaluates off the axis") {
  const EllipticityPair ell(0.5, 1.0);
  const ConeBarrier b = build_cone_barrier(0.75 * kPi, ell, 3, BarrierKind::Regular);
  const std::vector<double> axis{0, 0, 1};
  const std::vector<double> y{0.2, -0.1, 0.15};
  const Jet j = b.eval(y, axis);
  const ScalarField f = [&](std::span<const double> p) { return b.value(p, axis); };
  const SymMatrix H = fd_hessian(f, y);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) CHECK(j.hessian(i, k) == doctest::Approx(H(i, k)).epsilon(1e-5).scale(1e-3));
  CHECK(pucci_plus(j.hessian, ell) < 0.0);
}

TEST_CASE("harmonic x_n at lambda = Lambda is rejected") {
  const ConeBarrier v = ConeBarrier::from_profile(
      0.5 * kPi, 2, 1.0, [](double th) { return ProfileValue{std::cos(th), -std::sin(th), -std::cos(th)}; }, 1.0);
  CHECK_THROWS_AS(certify_cone_barrier(v, EllipticityPair(1.0, 1.0)), CertificationFailure);
  try {
    certify_cone_barrier(v, EllipticityPair(1.0, 1.0));
  } catch (const CertificationFailure& e) {
    // eta is zero up to the quintic table's interpolation error.
    CHECK(std::abs(e.lhs()) < 1e-10);
  }
}

TEST_CASE("json round trip preserves the barrier") {
  const auto& b = singular_barrier();
  const ConeBarrier c = barrier_from_json(barrier_to_json(b));
  CHECK(c.alpha() == b.alpha());
  CHECK(c.eta() == b.eta());
  const std::vector<double> axis{0, 1}, y{0.3, 0.2};
  CHECK(c.value(y, axis) == b.value(y, axis));
  CHECK_THROWS(barrier_from_json("{\"schema_version\": 9}"));
}

TEST_CASE("axis frames are orthogonal and send e_n to the axis") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int n = 2; n <= 4; ++n) {
    std::vector<double> a(static_cast<std::size_t>(n));
    for (auto& v : a) v = g(rng);
    const double na = norm(a);
    for (auto& v : a) v /= na;
    const auto Q = axis_frame(a);
    for (int i = 0; i < n; ++i) {
      CHECK(Q[static_cast<std::size_t>(i * n + n - 1)] == doctest::Approx(a[static_cast<std::size_t>(i)]).epsilon(1e-14));
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += Q[static_cast<std::size_t>(k * n + i)] * Q[static_cast<std::size_t>(k * n + j)];
        CHECK(s == doctest::Approx(i == j ? 1.0 : 0.0).scale(1.0).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("family constants") {
  const EllipticityPair ell(0.5, 1.0);
  const auto& b = regular_barrier();
  const std::vector<std::vector<double>> pts{{0.0, 0.0}, {1.0, 2.0}}, axes{{0.0, 1.0}, {1.0, 0.0}};
  const auto c = certify_barrier_family(b, pts, axes, 0.0, ell, 0.5, 0.5 * kPi);
  CHECK(c.C1 > 0.0);
  CHECK(c.C1 <= c.C2);
  CHECK(c.C5 > 0.0);
  // With K = 0 the radial factor cancels: C5 = min over theta of eta-type ratio, C5 / C1 near the slack.
  CHECK(c.C5 >= b.eta() * (1 - 1e-9));
  CHECK(std::isinf(max_family_radius(b, ell, 0.0, 0.5 * kPi)));
  const double R = max_family_radius(b, ell, 0.1, 0.5 * kPi);
  CHECK(R > 0.0);
  CHECK_NOTHROW(certify_barrier_family(b, pts, axes, 0.1, ell, 0.5 * R, 0.5 * kPi));
  CHECK_THROWS_AS(certify_barrier_family(b, pts, axes, 0.1, ell, 4.0 * R, 0.5 * kPi), CertificationFailure);
}

TEST_CASE("kind names") {
  CHECK(to_string(BarrierKind::Regular) == "regular");
  CHECK(barrier_kind_from_string("singular") == BarrierKind::Singular);
  CHECK_THROWS_AS(barrier_kind_from_string("sideways"), InvalidInput);
  CHECK_THROWS_AS(build_cone_barrier(4.0, EllipticityPair(0.5, 1.0), 2, BarrierKind::Regular), ParameterError);
}
