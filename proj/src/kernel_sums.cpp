// Built with vector math flags; keep this file free of anything that needs
// strict IEEE semantics.
#include "kernel_sums.hpp"

#include <math.h>

namespace biplate::detail {

namespace {
constexpr double kHalfPi = 1.57079632679489661923;
}

KernelSums kernel_sums(const double* __restrict xs, const double* __restrict ys, const double* __restrict zs,
                       const double* __restrict w, std::size_t n, const double x[3], double kre, double kim) {
    double g0 = 0, g1 = 0, l0 = 0, l1 = 0;
    double dgx0 = 0, dgx1 = 0, dgy0 = 0, dgy1 = 0, dgz0 = 0, dgz1 = 0;
    double dlx0 = 0, dlx1 = 0, dly0 = 0, dly1 = 0, dlz0 = 0, dlz1 = 0;
    const double px = x[0], py = x[1], pz = x[2];
    for (std::size_t i = 0; i < n; ++i) {
        const double sx = px - xs[i], sy = py - ys[i], sz = pz - zs[i];
        const double r = sqrt(sx * sx + sy * sy + sz * sz);
        const double inv_r = 1.0 / r;
        const double da = exp(-kim * r), db = exp(-kre * r);
        // sin as a shifted cos: a fused sincos call would block vectorization.
        const double ar = da * cos(kre * r), ai = da * cos(kre * r - kHalfPi);
        const double br = db * cos(kim * r), bi = -db * cos(kim * r - kHalfPi);
        const double par = -kim * r - 1.0, pai = kre * r;
        const double pbr = kre * r + 1.0, pbi = kim * r;
        const double apr = ar * par - ai * pai, api = ar * pai + ai * par;
        const double bpr = br * pbr - bi * pbi, bpi = br * pbi + bi * pbr;
        const double w1 = w[i] * inv_r;
        const double w3 = w1 * inv_r * inv_r;
        g0 += w1 * (ar - br);
        g1 += w1 * (ai - bi);
        l0 += w1 * (ar + br);
        l1 += w1 * (ai + bi);
        const double gr = w3 * (apr + bpr), gi = w3 * (api + bpi);
        const double lr = w3 * (apr - bpr), li = w3 * (api - bpi);
        dgx0 += gr * sx;
        dgx1 += gi * sx;
        dgy0 += gr * sy;
        dgy1 += gi * sy;
        dgz0 += gr * sz;
        dgz1 += gi * sz;
        dlx0 += lr * sx;
        dlx1 += li * sx;
        dly0 += lr * sy;
        dly1 += li * sy;
        dlz0 += lr * sz;
        dlz1 += li * sz;
    }
    KernelSums s;
    s.g[0] = g0;
    s.g[1] = g1;
    s.l[0] = l0;
    s.l[1] = l1;
    s.dg[0][0] = dgx0;
    s.dg[0][1] = dgx1;
    s.dg[1][0] = dgy0;
    s.dg[1][1] = dgy1;
    s.dg[2][0] = dgz0;
    s.dg[2][1] = dgz1;
    s.dl[0][0] = dlx0;
    s.dl[0][1] = dlx1;
    s.dl[1][0] = dly0;
    s.dl[1][1] = dly1;
    s.dl[2][0] = dlz0;
    s.dl[2][1] = dlz1;
    return s;
}

}  // namespace biplate::detail
