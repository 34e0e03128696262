#include "exb/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>

namespace exb {

namespace {

std::atomic<bool> g_force_scalar{std::getenv("EXB_FORCE_SCALAR") != nullptr};

}  // namespace

void pucci_step_2d_scalar(const PucciStep2D& a) {
  const double ih2 = 1.0 / (a.h * a.h);
  const double i4h2 = 0.25 * ih2;
  const int nx = a.nx;
  for (int j = 1; j < a.ny - 1; ++j) {
    const double* up = a.u + static_cast<long>(j + 1) * nx;
    const double* uc = a.u + static_cast<long>(j) * nx;
    const double* dn = a.u + static_cast<long>(j - 1) * nx;
    double* o = a.out + static_cast<long>(j) * nx;
    for (int i = 1; i < nx - 1; ++i) {
      const double c = uc[i];
      const double uxx = (uc[i + 1] - 2.0 * c + uc[i - 1]) * ih2;
      const double uyy = (up[i] - 2.0 * c + dn[i]) * ih2;
      const double uxy = (up[i + 1] - up[i - 1] - dn[i + 1] + dn[i - 1]) * i4h2;
      const double mean = 0.5 * (uxx + uyy);
      const double half = 0.5 * (uxx - uyy);
      const double rad = std::sqrt(half * half + uxy * uxy);
      const double e0 = mean - rad;
      const double e1 = mean + rad;
      const double w0 = e0 > 0.0 ? a.Lambda * e0 : a.lambda * e0;
      const double w1 = e1 > 0.0 ? a.Lambda * e1 : a.lambda * e1;
      o[i] = c + a.dt * (w0 + w1);
    }
  }
}

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

KernelPath active_kernel() {
  return (!g_force_scalar.load() && avx2_supported()) ? KernelPath::Avx2 : KernelPath::Scalar;
}

void force_scalar(bool on) { g_force_scalar.store(on); }

std::string to_string(KernelPath p) { return p == KernelPath::Avx2 ? "avx2" : "scalar"; }

void pucci_step_2d(const PucciStep2D& a) {
  if (active_kernel() == KernelPath::Avx2)
    pucci_step_2d_avx2(a);
  else
    pucci_step_2d_scalar(a);
}

}  // namespace exb
