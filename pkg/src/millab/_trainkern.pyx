# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Fused full-batch gradient kernels for the 2-d experiment architectures.

Each call runs one forward + backward pass of the weighted binary
cross-entropy ``-(sum_i wlg_i * ln g_i + wl1mg_i * ln(1 - g_i))`` where
``g = clamp(sigmoid(z), EPS, 1-EPS)`` and gradients are taken at the
clamped values, matching ``millab.losses.weighted_bce`` composed with
``millab.nets.backward``. Logits are capped at +-700 before exp() purely to
avoid overflow; in double precision the sigmoid saturates to exactly 0/1
long before that, so the cap is unobservable.

Summation is sequential in instance order, so results are deterministic.
"""

from libc.math cimport exp

DEF ZCAP = 700.0
DEF EPS = 1e-7
DEF HI = 1.0 - 1e-7


def epoch_linear(const double[:, ::1] X, const double[::1] wlg, const double[::1] wl1mg,
                 double[::1] theta, double[::1] grads):
    """Gradient of the weighted BCE for a linear model on 2-d inputs.

    theta = [w0, w1, b]; grads is overwritten with [dw0, dw1, db].
    """
    cdef Py_ssize_t n = X.shape[0], i
    cdef double w0 = theta[0], w1 = theta[1], b = theta[2]
    cdef double gw0 = 0.0, gw1 = 0.0, gb = 0.0
    cdef double x0, x1, z, s, g, a, c, dz
    for i in range(n):
        x0 = X[i, 0]; x1 = X[i, 1]
        z = w0 * x0 + w1 * x1 + b
        if z > ZCAP: z = ZCAP
        elif z < -ZCAP: z = -ZCAP
        s = 1.0 / (1.0 + exp(-z))
        g = EPS if s < EPS else (HI if s > HI else s)
        a = wlg[i] + wl1mg[i]; c = wlg[i]
        # dL/dg * sigma'(z), with dL/dg = (a*g - c) / (g*(1-g)) at clamped g
        dz = (a * g - c) * (s * (1.0 - s)) / (g * (1.0 - g))
        gw0 += dz * x0; gw1 += dz * x1; gb += dz
    grads[0] = gw0; grads[1] = gw1; grads[2] = gb


def epoch_two_layer(const double[:, ::1] X, const double[::1] wlg, const double[::1] wl1mg,
                    double[::1] theta, double[::1] grads):
    """Gradient of the weighted BCE for the 2-hidden-unit sigmoid MLP on 2-d inputs.

    theta = [W1_00, W1_01, W1_10, W1_11, b1_0, b1_1, w2_0, w2_1, b2];
    grads is overwritten in the same layout.
    """
    cdef Py_ssize_t n = X.shape[0], i
    cdef double W00 = theta[0], W01 = theta[1], W10 = theta[2], W11 = theta[3]
    cdef double b10 = theta[4], b11 = theta[5]
    cdef double w20 = theta[6], w21 = theta[7], b2 = theta[8]
    cdef double gW00 = 0.0, gW01 = 0.0, gW10 = 0.0, gW11 = 0.0
    cdef double gb10 = 0.0, gb11 = 0.0, gw20 = 0.0, gw21 = 0.0, gb2 = 0.0
    cdef double x0, x1, z10, z11, a0, a1, z2, s, g, a, c, dz2, d0, d1
    for i in range(n):
        x0 = X[i, 0]; x1 = X[i, 1]
        z10 = W00 * x0 + W01 * x1 + b10
        z11 = W10 * x0 + W11 * x1 + b11
        if z10 > ZCAP: z10 = ZCAP
        elif z10 < -ZCAP: z10 = -ZCAP
        if z11 > ZCAP: z11 = ZCAP
        elif z11 < -ZCAP: z11 = -ZCAP
        a0 = 1.0 / (1.0 + exp(-z10))
        a1 = 1.0 / (1.0 + exp(-z11))
        z2 = w20 * a0 + w21 * a1 + b2
        if z2 > ZCAP: z2 = ZCAP
        elif z2 < -ZCAP: z2 = -ZCAP
        s = 1.0 / (1.0 + exp(-z2))
        g = EPS if s < EPS else (HI if s > HI else s)
        a = wlg[i] + wl1mg[i]; c = wlg[i]
        dz2 = (a * g - c) * (s * (1.0 - s)) / (g * (1.0 - g))
        gw20 += dz2 * a0; gw21 += dz2 * a1; gb2 += dz2
        d0 = dz2 * w20 * a0 * (1.0 - a0)
        d1 = dz2 * w21 * a1 * (1.0 - a1)
        gW00 += d0 * x0; gW01 += d0 * x1
        gW10 += d1 * x0; gW11 += d1 * x1
        gb10 += d0; gb11 += d1
    grads[0] = gW00; grads[1] = gW01; grads[2] = gW10; grads[3] = gW11
    grads[4] = gb10; grads[5] = gb11; grads[6] = gw20; grads[7] = gw21
    grads[8] = gb2
