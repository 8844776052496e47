"""Averaging, maximal, and Littlewood-Paley operators on grid functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceFailure,
    NotMeanZero,
    NotNormalized,
    SignsIncomplete,
    SupportTooLarge,
)
from .gridfn import GridFunction, boundary_max, interpolate, l2_inner, lp_norm, quadrature
from .group import dilate, inverse, multiply
from .measure import DiscreteMeasure, dilate_measure, make_measure, reflect_measure

BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class SignSequence:
    """Reproducible IID +-1 signs indexed by scale k."""

    signs: dict
    seed: int

    def __post_init__(self):
        if any(s not in (-1, 1) for s in self.signs.values()):
            raise ValueError("signs must be -1 or +1")

    def __getitem__(self, k):
        return self.signs[k]

    def covers(self, ks):
        return all(k in self.signs for k in ks)


def sign_sequence(seed, k_lo, k_hi):
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, 2, size=k_hi - k_lo + 1) * 2 - 1
    return SignSequence({k: int(s) for k, s in zip(range(k_lo, k_hi + 1), draws)},
                        int(seed))


def average(alg, f, sigma):
    """A[sigma]f(x) = sum_i w_i f(x . y_i^-1), out-of-grid reads as 0."""
    grid = f.grid
    d = alg.dim
    out = np.zeros(grid.shape)
    if alg.step <= 2 and d in (1, 2, 3):
        from . import _kernels

        Y = sigma.points
        C = alg.structure_dense
        M = np.broadcast_to(np.eye(d), (Y.shape[0], d, d)).copy()
        if not alg.is_abelian:
            M = M - 0.5 * np.einsum("ijk,pj->pki", C, Y)
        b = -Y
        w = np.ascontiguousarray(sigma.weights)
        vals = np.ascontiguousarray(f.values, dtype=float)
        h = grid.spacing
        if d == 1:
            _kernels.avg_affine_1d(vals, grid.lo[0], h[0],
                                   np.ascontiguousarray(M[:, 0, 0]),
                                   np.ascontiguousarray(b[:, 0]), w, out)
        elif d == 2:
            _kernels.avg_affine_2d(vals, grid.lo[0], grid.lo[1], h[0], h[1],
                                   np.ascontiguousarray(M),
                                   np.ascontiguousarray(b), w, out)
        else:
            _kernels.avg_affine_3d(vals, grid.lo[0], grid.lo[1], grid.lo[2],
                                   h[0], h[1], h[2],
                                   np.ascontiguousarray(M),
                                   np.ascontiguousarray(b), w, out)
        return GridFunction(grid, out)

    nodes = grid.nodes()
    flat = np.zeros(grid.n_nodes)
    for p, w in zip(sigma.points, sigma.weights):
        flat += w * interpolate(f, multiply(alg, nodes, inverse(p)))
    return GridFunction(grid, flat.reshape(grid.shape))


def lacunary_maximal(alg, f, sigma, k_lo, k_hi):
    """M[sigma]f = max over k in [k_lo, k_hi] of |A[sigma_k]f|."""
    if k_lo > k_hi:
        raise ValueError("k_lo must be <= k_hi")
    out = None
    for k in range(k_lo, k_hi + 1):
        a = np.abs(average(alg, f, dilate_measure(alg, k, sigma)).values)
        out = a if out is None else np.maximum(out, a)
    return GridFunction(f.grid, out)


def build_psi(alg, phi, t_nodes=16):
    """Mean-zero window psi(x) = int_1^2 h_t(x) dt/t from a unit bump phi.

    h(x) = Q phi(x) + sum_j lambda_j x_j d_j phi(x), differenced centrally,
    so that quadrature(h) = 0 by summation by parts; h_t = t^-Q h o delta_1/t.
    The residual quadrature of psi (interpolation leakage) is removed by
    subtracting that multiple of phi.
    """
    grid = phi.grid
    q_phi = quadrature(phi)
    if abs(q_phi - 1.0) > 1e-6:
        raise NotNormalized(f"quadrature(phi) = {q_phi}, need 1")
    if boundary_max(phi) > BOUNDARY_TOL:
        raise SupportTooLarge("phi must vanish at the grid boundary")
    # h_t samples phi at delta_1/t x for t up to 2: need support(phi) inside
    # half the box
    half = phi.with_values(np.where(_outer_half_mask(grid), phi.values, 0.0))
    if float(np.abs(half.values).max(initial=0.0)) > BOUNDARY_TOL:
        raise SupportTooLarge("support of phi must lie inside half the grid box")

    lam = alg.exponents_float
    h_vals = float(alg.Q) * phi.values.copy()
    axes = grid.axes()
    sp = grid.spacing
    for j in range(grid.dim):
        dj = np.zeros_like(phi.values)
        sl_p = [slice(None)] * grid.dim
        sl_m = [slice(None)] * grid.dim
        sl_c = [slice(None)] * grid.dim
        sl_p[j] = slice(2, None)
        sl_m[j] = slice(0, -2)
        sl_c[j] = slice(1, -1)
        dj[tuple(sl_c)] = (phi.values[tuple(sl_p)] - phi.values[tuple(sl_m)]) / (2 * sp[j])
        shape = [1] * grid.dim
        shape[j] = -1
        h_vals += lam[j] * axes[j].reshape(shape) * dj
    h = GridFunction(grid, h_vals)

    n = int(t_nodes)
    if n < 1:
        raise ValueError("t_nodes must be >= 1")
    nodes = grid.nodes()
    psi_vals = np.zeros(grid.n_nodes)
    Q = float(alg.Q)
    for i in range(n):
        t = 1.0 + (i + 0.5) / n
        shrunk = dilate(alg, 1.0 / t, nodes)
        psi_vals += t ** (-Q - 1.0) * interpolate(h, shrunk, order=3) / n
    psi_vals = psi_vals.reshape(grid.shape)
    psi_vals -= (psi_vals.sum() * grid.cell_volume / q_phi) * phi.values
    return GridFunction(grid, psi_vals, frozenset({"mean_zero"}))


def _outer_half_mask(grid):
    """True on nodes outside the centered half-size box."""
    mask = np.zeros(grid.shape, dtype=bool)
    for j, ax in enumerate(grid.axes()):
        mid = 0.5 * (grid.lo[j] + grid.hi[j])
        quarter = 0.25 * (grid.hi[j] - grid.lo[j])
        outside = np.abs(ax - mid) > quarter
        shape = [1] * grid.dim
        shape[j] = -1
        mask |= outside.reshape(shape)
    return mask


def psi_cloud(alg, psi, threshold=0.0, stride=1):
    """psi as a weighted cloud: weights = value x cell volume.

    The cloud for psi_k = 2^(-kQ) psi o delta_(2^-k) is the 2^k-dilate of
    this one with unchanged weights.  stride > 1 keeps every stride-th
    node per axis (weights scaled by stride^dim), trading quadrature
    accuracy for cloud size.
    """
    grid = psi.grid
    vals = psi.values
    if stride > 1:
        sl = tuple(slice(0, None, stride) for _ in range(grid.dim))
        sub = np.zeros_like(vals)
        sub[sl] = vals[sl] * stride ** grid.dim
        vals = sub
    keep = np.abs(vals).ravel() > threshold
    pts = grid.nodes()[keep]
    w = vals.ravel()[keep] * grid.cell_volume
    flags = {"mean_zero"} if "mean_zero" in psi.flags else set()
    if flags and abs(w.sum()) > 1e-10 * max(np.abs(w).sum(), 1e-300):
        w = w - w.sum() * np.abs(w) / np.abs(w).sum()  # re-center after trim
    return make_measure(alg, pts, w, flags=flags)


def lp_pieces(alg, f, psi, k):
    """Littlewood-Paley piece f * psi_k by quadrature convolution."""
    if boundary_max(f) > BOUNDARY_TOL:
        raise SupportTooLarge("f must vanish at the grid boundary")
    cloud = psi if isinstance(psi, DiscreteMeasure) else psi_cloud(alg, psi)
    return average(alg, f, dilate_measure(alg, k, cloud))


def t_ell_pieces(alg, f, nu, psi, ell, k_window):
    """The pieces T_ell^k f = f * psi_(k+ell) * nu_k over the window."""
    if "mean_zero" not in nu.flags:
        raise NotMeanZero("nu must be flagged mean_zero")
    cloud = psi if isinstance(psi, DiscreteMeasure) else psi_cloud(alg, psi)
    out = {}
    for k in k_window:
        piece = lp_pieces(alg, f, cloud, k + ell)
        out[k] = average(alg, piece, dilate_measure(alg, k, nu))
    return out


def square_function(alg, f, nu, psi, ell, k_window, pieces=None):
    """S_ell f = (sum_k |f * psi_(k+ell) * nu_k|^2)^(1/2)."""
    if pieces is None:
        pieces = t_ell_pieces(alg, f, nu, psi, ell, k_window)
    acc = np.zeros(f.grid.shape)
    for k in k_window:
        acc += pieces[k].values ** 2
    return GridFunction(f.grid, np.sqrt(acc))


def randomized_sum(alg, f, nu, psi, ell, k_window, signs, pieces=None):
    """T_(ell,r) f = sum_k r_k f * psi_(k+ell) * nu_k."""
    if not signs.covers(k_window):
        raise SignsIncomplete(f"signs missing for part of window {list(k_window)}")
    if pieces is None:
        pieces = t_ell_pieces(alg, f, nu, psi, ell, k_window)
    acc = np.zeros(f.grid.shape)
    for k in k_window:
        acc += signs[k] * pieces[k].values
    return GridFunction(f.grid, acc)


def op_norm_l2(alg, kernel_measure, grid, iters=30, tol=1e-4, seed=0, restarts=3,
               collar=0.0):
    """Power-iteration estimate of the L2 -> L2 norm of f -> f * kernel.

    ``kernel_measure`` is a DiscreteMeasure or a sequence of them; a
    sequence means the convolution product applied factor by factor
    (f * s1 * s2 * ...), which keeps the kernel exact where building the
    product cloud would force lossy resampling.  Iterates the composition
    with its adjoint from seeded white-noise starts; returns the square
    root of the largest Rayleigh quotient seen.  Grid truncation makes
    this a lower bound up to discretization error.

    ``collar`` restricts the iterates to points at least that far inside
    the box.  Zero padding truncates the kernel near the boundary, which
    breaks its mean-zero cancellation and manufactures spurious edge
    modes; for interior-supported inputs the padding is exact.  A collar
    of at least the kernel support radius removes the edge modes while
    still bounding the convolution norm from below.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    factors = ([kernel_measure] if isinstance(kernel_measure, DiscreteMeasure)
               else list(kernel_measure))
    if any(m.total_variation == 0.0 for m in factors):
        return 0.0
    adjoints = [reflect_measure(m) for m in reversed(factors)]
    if collar > 0.0:
        nodes = grid.nodes().reshape(grid.shape + (len(grid.lo),))
        inner = np.ones(grid.shape, dtype=bool)
        for j, (a, b) in enumerate(zip(grid.lo, grid.hi)):
            c = nodes[..., j]
            inner &= (c >= a + collar) & (c <= b - collar)
        if not inner.any():
            raise ValueError("collar leaves no interior nodes")
    else:
        inner = None
    best = 0.0
    last_two = (np.nan, np.nan)
    for r in range(restarts):
        rng = np.random.default_rng(seed + r)
        start = rng.standard_normal(grid.shape)
        if inner is not None:
            start = start * inner
        g = GridFunction(grid, start)
        nrm = lp_norm(g, 2)
        g = g.with_values(g.values / nrm)
        prev = np.inf
        for _ in range(iters):
            ag = g
            for m in factors:
                ag = average(alg, ag, m)
            aag = ag
            for m in adjoints:
                aag = average(alg, aag, m)
            if inner is not None:
                aag = aag.with_values(aag.values * inner)
            ray = l2_inner(g, aag)
            if not np.isfinite(ray):
                raise ConvergenceFailure(
                    f"non-finite Rayleigh quotient, last two: {last_two}"
                )
            last_two = (prev, ray)
            nrm = lp_norm(aag, 2)
            if nrm == 0.0:
                ray = 0.0
                break
            g = aag.with_values(aag.values / nrm)
            if abs(ray - prev) < tol * max(abs(ray), 1e-300):
                prev = ray
                break
            prev = ray
        best = max(best, max(ray, 0.0))
    return float(np.sqrt(best))
