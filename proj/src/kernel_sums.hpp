#pragma once

#include <cstddef>

namespace biplate::detail {

// Sums over point sources (x_i, w_i) of
//   w (ea -+ eb) / r  and  w (ea pa +- eb pb) sep / r^3
// with ea = e^{i kappa r}, eb = e^{-kappa r}, pa = i kappa r - 1,
// pb = kappa r + 1, sep = x - y_i. Scaling by the kernel constants is left
// to the caller.
struct KernelSums {
    double g[2] = {0.0, 0.0};
    double l[2] = {0.0, 0.0};
    double dg[3][2] = {};
    double dl[3][2] = {};
};

KernelSums kernel_sums(const double* xs, const double* ys, const double* zs, const double* w, std::size_t n,
                       const double x[3], double kappa_re, double kappa_im);

}  // namespace biplate::detail
