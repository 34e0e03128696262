#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "../oracles.hpp"
#include "exb/kernels.hpp"

using namespace exb;

namespace {

struct Case {
  int nx, ny;
  std::vector<double> u;
};

Case random_case(int nx, int ny, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Case c{nx, ny, std::vector<double>(static_cast<std::size_t>(nx * ny))};
  for (auto& v : c.u) v = g(rng);
  return c;
}

std::vector<double> run(void (*kernel)(const PucciStep2D&), const Case& c, double h, double dt, double lam,
                        double Lam) {
  std::vector<double> out(c.u);
  kernel({c.u.data(), out.data(), c.nx, c.ny, h, dt, lam, Lam});
  return out;
}

}  // namespace

TEST_CASE("AVX2 kernel is bit-identical to the scalar kernel") {
  if (!avx2_supported()) {
    MESSAGE("AVX2 not available; skipping");
    return;
  }
  // Odd widths exercise the scalar tail of each row.
  for (auto [nx, ny] : {std::pair{5, 5}, {6, 4}, {17, 9}, {33, 33}, {130, 7}}) {
    const Case c = random_case(nx, ny, static_cast<std::uint64_t>(nx * 100 + ny));
    const auto a = run(pucci_step_2d_scalar, c, 0.03, 1e-4, 0.3, 1.1);
    const auto b = run(pucci_step_2d_avx2, c, 0.03, 1e-4, 0.3, 1.1);
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("scalar kernel matches the eigenvalue oracle") {
  const Case c = random_case(12, 10, 4);
  const double h = 0.05, dt = 2e-4, lam = 0.4, Lam = 1.3;
  const auto out = run(pucci_step_2d_scalar, c, h, dt, lam, Lam);
  auto at = [&](int i, int j) { return c.u[static_cast<std::size_t>(j * c.nx + i)]; };
  for (int j = 0; j < c.ny; ++j) {
    for (int i = 0; i < c.nx; ++i) {
      const double got = out[static_cast<std::size_t>(j * c.nx + i)];
      if (i == 0 || j == 0 || i == c.nx - 1 || j == c.ny - 1) {
        CHECK(got == at(i, j));
        continue;
      }
      const double uxx = (at(i + 1, j) - 2 * at(i, j) + at(i - 1, j)) / (h * h);
      const double uyy = (at(i, j + 1) - 2 * at(i, j) + at(i, j - 1)) / (h * h);
      const double uxy = (at(i + 1, j + 1) - at(i - 1, j + 1) - at(i + 1, j - 1) + at(i - 1, j - 1)) / (4 * h * h);
      const oracle::Mat H{{uxx, uxy}, {uxy, uyy}};
      const double ref = at(i, j) + dt * oracle::pucci_plus(oracle::eigenvalues(H), lam, Lam);
      CHECK(got == doctest::Approx(ref).epsilon(1e-12));
    }
  }
}

TEST_CASE("dispatch honours force_scalar") {
  force_scalar(true);
  CHECK(active_kernel() == KernelPath::Scalar);
  const Case c = random_case(9, 9, 8);
  std::vector<double> out(c.u);
  pucci_step_2d({c.u.data(), out.data(), 9, 9, 0.1, 1e-3, 0.5, 1.0});
  CHECK(out == run(pucci_step_2d_scalar, c, 0.1, 1e-3, 0.5, 1.0));
  force_scalar(false);
  CHECK(active_kernel() == (avx2_supported() ? KernelPath::Avx2 : KernelPath::Scalar));
  CHECK(to_string(KernelPath::Avx2) == "avx2");
  CHECK(to_string(KernelPath::Scalar) == "scalar");
}
