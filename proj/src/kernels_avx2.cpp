#include "exb/kernels.hpp"

#include <cmath>

#if defined(__AVX2__)
#include <immintrin.h>
#endif

namespace exb {

#if defined(__AVX2__)

void pucci_step_2d_avx2(const PucciStep2D& a) {
  const double ih2 = 1.0 / (a.h * a.h);
  const double i4h2 = 0.25 * ih2;
  const __m256d vih2 = _mm256_set1_pd(ih2);
  const __m256d vi4h2 = _mm256_set1_pd(i4h2);
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d lam = _mm256_set1_pd(a.lambda);
  const __m256d Lam = _mm256_set1_pd(a.Lambda);
  const __m256d dt = _mm256_set1_pd(a.dt);
  const int nx = a.nx;

  auto weigh = [&](__m256d e) {
    const __m256d pos = _mm256_cmp_pd(e, zero, _CMP_GT_OQ);
    return _mm256_blendv_pd(_mm256_mul_pd(lam, e), _mm256_mul_pd(Lam, e), pos);
  };

  for (int j = 1; j < a.ny - 1; ++j) {
    const double* up = a.u + static_cast<long>(j + 1) * nx;
    const double* uc = a.u + static_cast<long>(j) * nx;
    const double* dn = a.u + static_cast<long>(j - 1) * nx;
    double* o = a.out + static_cast<long>(j) * nx;
    int i = 1;
    for (; i + 4 <= nx - 1; i += 4) {
      const __m256d c = _mm256_loadu_pd(uc + i);
      const __m256d uxx =
          _mm256_mul_pd(_mm256_add_pd(_mm256_sub_pd(_mm256_loadu_pd(uc + i + 1), _mm256_mul_pd(two, c)),
                                      _mm256_loadu_pd(uc + i - 1)),
                        vih2);
      const __m256d uyy = _mm256_mul_pd(
          _mm256_add_pd(_mm256_sub_pd(_mm256_loadu_pd(up + i), _mm256_mul_pd(two, c)), _mm256_loadu_pd(dn + i)),
          vih2);
      const __m256d uxy = _mm256_mul_pd(
          _mm256_add_pd(_mm256_sub_pd(_mm256_sub_pd(_mm256_loadu_pd(up + i + 1), _mm256_loadu_pd(up + i - 1)),
                                      _mm256_loadu_pd(dn + i + 1)),
                        _mm256_loadu_pd(dn + i - 1)),
          vi4h2);
      const __m256d mean = _mm256_mul_pd(half, _mm256_add_pd(uxx, uyy));
      const __m256d hd = _mm256_mul_pd(half, _mm256_sub_pd(uxx, uyy));
      const __m256d rad = _mm256_sqrt_pd(_mm256_add_pd(_mm256_mul_pd(hd, hd), _mm256_mul_pd(uxy, uxy)));
      const __m256d m = _mm256_add_pd(weigh(_mm256_sub_pd(mean, rad)), weigh(_mm256_add_pd(mean, rad)));
      _mm256_storeu_pd(o + i, _mm256_add_pd(c, _mm256_mul_pd(dt, m)));
    }
    // Tail columns, same arithmetic as the scalar kernel.
    {
      const double ih2s = ih2;
      for (; i < nx - 1; ++i) {
        const double cc = uc[i];
        const double xx = (uc[i + 1] - 2.0 * cc + uc[i - 1]) * ih2s;
        const double yy = (up[i] - 2.0 * cc + dn[i]) * ih2s;
        const double xy = (up[i + 1] - up[i - 1] - dn[i + 1] + dn[i - 1]) * i4h2;
        const double mn = 0.5 * (xx + yy);
        const double hf = 0.5 * (xx - yy);
        const double rd = std::sqrt(hf * hf + xy * xy);
        const double e0 = mn - rd;
        const double e1 = mn + rd;
        const double w0 = e0 > 0.0 ? a.Lambda * e0 : a.lambda * e0;
        const double w1 = e1 > 0.0 ? a.Lambda * e1 : a.lambda * e1;
        o[i] = cc + a.dt * (w0 + w1);
      }
    }
  }
}

#else

void pucci_step_2d_avx2(const PucciStep2D& a) { pucci_step_2d_scalar(a); }

#endif

}  // namespace exb
