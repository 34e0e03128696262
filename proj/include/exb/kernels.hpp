#pragma once

#include <string>

namespace exb {

/// One explicit Pucci step on a 2D row-major grid (x fastest):
/// out = u + dt * M+(D^2_h u) at interior nodes; boundary nodes untouched.
/// The Hessian uses central second differences and the four-point mixed
/// stencil; eigenvalues come from the closed form for 2x2 symmetric matrices.
struct PucciStep2D {
  const double* u;
  double* out;
  int nx;
  int ny;
  double h;
  double dt;
  double lambda;
  double Lambda;
};

enum class KernelPath { Scalar, Avx2 };

void pucci_step_2d_scalar(const PucciStep2D& a);
/// Same arithmetic as the scalar kernel, four nodes per instruction. Only
/// callable when avx2_supported() is true.
void pucci_step_2d_avx2(const PucciStep2D& a);

bool avx2_supported();

/// Avx2 when the CPU supports it, unless EXB_FORCE_SCALAR is set in the
/// environment or force_scalar(true) was called.
KernelPath active_kernel();
void force_scalar(bool on);
std::string to_string(KernelPath p);

void pucci_step_2d(const PucciStep2D& a);

}  // namespace exb
