"""Compiled inner loops for cloud convolution on regular grids.

For groups of step <= 2 the right translation x -> x . y^-1 is affine in x
for fixed y, so the averaging operator reduces to accumulating affinely
warped, multilinearly interpolated copies of the input.  The loops below
run one cloud point at a time and walk the node lattice with incremental
coordinate updates.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def avg_affine_1d(vals, lo, h, a, b, w, out):
    n = vals.shape[0]
    P = a.shape[0]
    for p in range(P):
        ap = a[p] * h
        tp = (a[p] * lo + b[p] - lo) / h
        wp = w[p]
        step = ap / h
        t = tp
        for i in range(n):
            if 0.0 <= t <= n - 1:
                i0 = int(t)
                if i0 == n - 1:
                    i0 -= 1
                fr = t - i0
                out[i] += wp * ((1.0 - fr) * vals[i0] + fr * vals[i0 + 1])
            t += step
    return out


@njit(cache=True, fastmath=True)
def avg_affine_2d(vals, lo0, lo1, h0, h1, M, b, w, out):
    n0, n1 = vals.shape
    P = M.shape[0]
    for p in range(P):
        wp = w[p]
        # target coords of node (i0, i1): M . x + b with x = lo + i*h
        c00 = M[p, 0, 0] * h0
        c01 = M[p, 0, 1] * h1
        c10 = M[p, 1, 0] * h0
        c11 = M[p, 1, 1] * h1
        base0 = M[p, 0, 0] * lo0 + M[p, 0, 1] * lo1 + b[p, 0]
        base1 = M[p, 1, 0] * lo0 + M[p, 1, 1] * lo1 + b[p, 1]
        for i0 in range(n0):
            t0 = base0 + c00 * i0
            t1 = base1 + c10 * i0
            for i1 in range(n1):
                f0 = (t0 - lo0) / h0
                f1 = (t1 - lo1) / h1
                if 0.0 <= f0 <= n0 - 1 and 0.0 <= f1 <= n1 - 1:
                    a0 = int(f0)
                    a1 = int(f1)
                    if a0 == n0 - 1:
                        a0 -= 1
                    if a1 == n1 - 1:
                        a1 -= 1
                    r0 = f0 - a0
                    r1 = f1 - a1
                    v = ((1 - r0) * ((1 - r1) * vals[a0, a1] + r1 * vals[a0, a1 + 1])
                         + r0 * ((1 - r1) * vals[a0 + 1, a1] + r1 * vals[a0 + 1, a1 + 1]))
                    out[i0, i1] += wp * v
                t0 += c01
                t1 += c11
    return out


@njit(cache=True, fastmath=True)
def avg_affine_3d(vals, lo0, lo1, lo2, h0, h1, h2, M, b, w, out):
    n0, n1, n2 = vals.shape
    P = M.shape[0]
    for p in range(P):
        wp = w[p]
        base0 = M[p, 0, 0] * lo0 + M[p, 0, 1] * lo1 + M[p, 0, 2] * lo2 + b[p, 0]
        base1 = M[p, 1, 0] * lo0 + M[p, 1, 1] * lo1 + M[p, 1, 2] * lo2 + b[p, 1]
        base2 = M[p, 2, 0] * lo0 + M[p, 2, 1] * lo1 + M[p, 2, 2] * lo2 + b[p, 2]
        for i0 in range(n0):
            u0 = base0 + M[p, 0, 0] * h0 * i0
            u1 = base1 + M[p, 1, 0] * h0 * i0
            u2 = base2 + M[p, 2, 0] * h0 * i0
            for i1 in range(n1):
                t0 = u0 + M[p, 0, 1] * h1 * i1
                t1 = u1 + M[p, 1, 1] * h1 * i1
                t2 = u2 + M[p, 2, 1] * h1 * i1
                d0 = M[p, 0, 2] * h2
                d1 = M[p, 1, 2] * h2
                d2 = M[p, 2, 2] * h2
                for i2 in range(n2):
                    f0 = (t0 - lo0) / h0
                    f1 = (t1 - lo1) / h1
                    f2 = (t2 - lo2) / h2
                    if (0.0 <= f0 <= n0 - 1 and 0.0 <= f1 <= n1 - 1
                            and 0.0 <= f2 <= n2 - 1):
                        a0 = int(f0)
                        a1 = int(f1)
                        a2 = int(f2)
                        if a0 == n0 - 1:
                            a0 -= 1
                        if a1 == n1 - 1:
                            a1 -= 1
                        if a2 == n2 - 1:
                            a2 -= 1
                        r0 = f0 - a0
                        r1 = f1 - a1
                        r2 = f2 - a2
                        v00 = (1 - r2) * vals[a0, a1, a2] + r2 * vals[a0, a1, a2 + 1]
                        v01 = (1 - r2) * vals[a0, a1 + 1, a2] + r2 * vals[a0, a1 + 1, a2 + 1]
                        v10 = (1 - r2) * vals[a0 + 1, a1, a2] + r2 * vals[a0 + 1, a1, a2 + 1]
                        v11 = (1 - r2) * vals[a0 + 1, a1 + 1, a2] + r2 * vals[a0 + 1, a1 + 1, a2 + 1]
                        v = ((1 - r0) * ((1 - r1) * v00 + r1 * v01)
                             + r0 * ((1 - r1) * v10 + r1 * v11))
                        out[i0, i1, i2] += wp * v
                    t0 += d0
                    t1 += d1
                    t2 += d2
    return out
