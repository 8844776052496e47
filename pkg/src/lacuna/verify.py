"""Experiment drivers probing the quantitative behavior of the operators:
scale-separated L2 decay, almost-orthogonality of composite kernels,
Hormander-type integrals, the right-derivative mean-value bound, and the
double-point construction on convex boundaries.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .errors import (
    KernelTooSmall,
    NoSignChange,
    NotMeanZero,
    OutOfDomain,
    SupportTooLarge,
    WindowTooSmall,
)
from .fitting import DecayFit, fit_loglog
from .gridfn import GridFunction, from_callable, interpolate, quadrature
from .group import (
    dilate,
    hom_norm,
    inverse,
    multiply,
    quasi_triangle_const,
    right_derivative_grid,
)
from .measure import ConvexGauge, DiscreteMeasure, convolve_measures, dilate_measure, reflect_measure
from .operator import average, op_norm_l2, psi_cloud

BOUNDARY_MASS_TOL = 1e-6


def _require_mean_zero(*measures):
    for m in measures:
        if "mean_zero" not in m.flags:
            raise NotMeanZero("measure must be flagged mean_zero")


def l2_decay_experiment(alg, mu, theta, gaps, grid, iters=25, seed=0,
                        max_points=60_000, tol=1e-5, restarts=2, collar=0.0):
    """Operator-norm decay of A[mu_(-g) * theta] across scale gaps g.

    The kernel at gap g composes the 2^-g dilate of mu with theta; norms
    are regressed as log2 norm ~ -rho g, so the returned slope is the
    decay rate rho-hat (positive means decay).  ``grid`` may be a callable
    gap -> Grid, letting the integration box track the shrinking kernel
    support (a fixed coarse cell sets an artifact floor on small norms).
    The product cloud is built exactly when it stays under ``max_points``;
    larger products are applied factor by factor, which is exact too
    (resampling a signed product cloud adds a white-noise floor
    ~ TV/sqrt(max_points) that swamps the small large-gap norms).
    ``collar`` is forwarded to op_norm_l2: a collar of at least the
    kernel support radius suppresses the boundary-truncation modes that
    otherwise floor the large-gap norms.
    """
    _require_mean_zero(mu, theta)
    gaps = sorted(int(g) for g in gaps)
    if gaps[-1] - gaps[0] < 3:
        raise ValueError("gaps must span >= 3 octave steps")
    norms = []
    for g in gaps:
        factors = (dilate_measure(alg, -g, mu), theta)
        if factors[0].size * factors[1].size <= max_points:
            factors = convolve_measures(alg, *factors)
        grid_g = grid(g) if callable(grid) else grid
        norms.append(op_norm_l2(alg, factors, grid_g, iters=iters, tol=tol,
                                seed=seed, restarts=restarts, collar=collar))
    return fit_loglog(np.asarray(gaps, dtype=float), norms, slope_sign=-1.0), norms


TABLE_KERNELS = ("psi_l*nu", "nu*nu~", "nu~*psi~_l", "psi~_l*psi_l")


def almost_orthogonality_experiment(alg, nu, psi, triples, grid, seed=0,
                                    iters=20, tol=1e-4, max_points=60_000,
                                    restarts=1):
    """Norms of the four composite kernels over (j, k, l) triples.

    Kernels: psi_(j+l) * nu_j, nu_j * nu~_k, nu~_j * psi~_(j+l),
    psi~_(j+l) * psi_(k+l).  Returns the table plus two fits: decay in |l|
    (first family) and decay in |j - k| (fourth family).
    """
    _require_mean_zero(nu)
    base = psi if isinstance(psi, DiscreteMeasure) else psi_cloud(alg, psi)
    _require_mean_zero(base)
    table = []
    for j, k, ell in triples:
        psi_jl = dilate_measure(alg, j + ell, base)
        psi_kl = dilate_measure(alg, k + ell, base)
        nu_j = dilate_measure(alg, j, nu)
        nu_k = dilate_measure(alg, k, nu)
        kernels = (
            (psi_jl, nu_j),
            (nu_j, reflect_measure(nu_k)),
            (reflect_measure(nu_j), reflect_measure(psi_jl)),
            (reflect_measure(psi_jl), psi_kl),
        )
        row = {"j": j, "k": k, "ell": ell}
        for name, factors in zip(TABLE_KERNELS, kernels):
            # exact small products; larger ones applied factor by factor
            if factors[0].size * factors[1].size <= max_points:
                factors = convolve_measures(alg, *factors)
            row[name] = op_norm_l2(alg, factors, grid, iters=iters, tol=tol,
                                   seed=seed, restarts=restarts)
        table.append(row)

    ell_rows = {}
    for row in table:
        ell_rows.setdefault(abs(row["ell"]), []).append(row["psi_l*nu"])
    gap_rows = {}
    for row in table:
        gap_rows.setdefault(abs(row["j"] - row["k"]), []).append(row["psi~_l*psi_l"])
    fit_ell = fit_loglog(
        np.array(sorted(ell_rows), dtype=float),
        [max(ell_rows[a]) for a in sorted(ell_rows)],
        slope_sign=-1.0,
    )
    fit_gap = fit_loglog(
        np.array(sorted(gap_rows), dtype=float),
        [max(gap_rows[a]) for a in sorted(gap_rows)],
        slope_sign=-1.0,
    )
    return table, fit_ell, fit_gap


# -- Hormander integrals ------------------------------------------------------

def hormander_kernel(alg, psi, nu, ell, grid):
    """K = psi_ell * nu sampled on the integration grid."""
    Q = float(alg.Q)

    def psi_ell_vals(x):
        return 2.0 ** (-ell * Q) * interpolate(psi, dilate(alg, 2.0 ** (-ell), x))

    f = from_callable(grid, psi_ell_vals)
    return average(alg, f, nu)


def hormander_integral(alg, K, k, y, c0, support_radius=None):
    """I_l^k(y) = integral over |x| >= c0 2^-k |y| of |K(z^-1 . x) - K(x)|,
    z = delta_(2^-k) y, on the grid carrying K.

    Exactly zero (vanishing-support case) when |y| is so large that the
    shifted and unshifted supports both miss the truncated region.
    """
    grid = K.grid
    y = np.asarray(y, dtype=float)
    ny = float(hom_norm(alg, y))
    if ny == 0.0:
        return 0.0
    z = dilate(alg, 2.0 ** (-k), y)
    cv = grid.cell_volume
    base_l1 = float(np.abs(K.values).sum() * cv)
    nodes = grid.nodes()
    shifted = interpolate(K, multiply(alg, inverse(z), nodes)).reshape(grid.shape)
    # the shift z^-1 . x must keep the kernel support on the grid
    l1 = float(np.abs(shifted).sum() * cv)
    lost = abs(l1 - base_l1)
    if support_radius is not None and float(hom_norm(alg, z)) >= 2.0 * support_radius:
        pass  # both terms vanish on the truncated region regardless of leakage
    elif base_l1 > 0 and lost > 0.02 * base_l1:
        raise SupportTooLarge(
            f"shifted kernel leaks off the grid (L1 {l1:.3g} vs {base_l1:.3g})"
        )
    mask = (hom_norm(alg, nodes) >= c0 * 2.0 ** (-k) * ny).reshape(grid.shape)
    return float((np.abs(shifted - K.values) * mask).sum() * cv)


def hormander_sum(alg, psi, nu, ell, y, k_window, grid, c0=None, seed=0):
    """Sum over the window of I_l^k(y), with the window-adequacy check.

    Returns (total, per_k dict).  Raises WindowTooSmall when the terms at
    the window edges are above the vanishing tolerance, i.e. mass of the
    sum may be missing.
    """
    if c0 is None:
        c0 = 2.0 * quasi_triangle_const(alg, 20_000, seed=seed)
    K = hormander_kernel(alg, psi, nu, ell, grid)
    R = _cloud_radius(alg, K)
    ks = sorted(k_window)
    per_k = {}
    for k in ks:
        per_k[k] = hormander_integral(alg, K, k, y, c0, support_radius=R)
    # at the low edge vanishing is exact once |y| >= 2R 2^(k+max(l,0)), at the
    # high edge the terms decay like the shift size; either way an edge term
    # above tolerance means the window is dropping mass
    for edge in (ks[0], ks[-1]):
        if per_k[edge] > BOUNDARY_MASS_TOL:
            raise WindowTooSmall(f"k = {edge} edge term {per_k[edge]:.2e} above tolerance")
    return float(sum(per_k.values())), per_k


def _cloud_radius(alg, K, frac=1e-9):
    """Homogeneous radius of the numerically nonzero support of K."""
    nodes = K.grid.nodes()
    vals = np.abs(K.values).ravel()
    keep = vals > frac * vals.max()
    if not keep.any():
        return 0.0
    return float(hom_norm(alg, nodes[keep]).max())


def hormander_vanishing_radius(alg, K, k, ell):
    """|y| threshold beyond which I_l^k(y) = 0, from the measured support."""
    return 2.0 * _cloud_radius(alg, K) * 2.0 ** (k + max(ell, 0))


# -- mean value and convexity -------------------------------------------------

def mean_value_check(alg, g, z, mass_check=0.02):
    """lhs = integral |g(z . x) - g(x)|; rhs = sum_j |z|^lambda_j ||X_j^R g||_1."""
    grid = g.grid
    z = np.asarray(z, dtype=float)
    cv = grid.cell_volume
    nodes = grid.nodes()
    shifted = interpolate(g, multiply(alg, z, nodes)).reshape(grid.shape)
    base_l1 = float(np.abs(g.values).sum() * cv)
    l1 = float(np.abs(shifted).sum() * cv)
    if base_l1 > 0 and abs(l1 - base_l1) > mass_check * base_l1:
        raise OutOfDomain(
            f"translate leaves the grid (L1 {l1:.3g} vs {base_l1:.3g})"
        )
    lhs = float(np.abs(shifted - g.values).sum() * cv)
    nz = float(hom_norm(alg, z))
    lam = alg.exponents_float
    rhs = 0.0
    for j in range(alg.dim):
        dj = right_derivative_grid(alg, g, j)
        rhs += nz ** lam[j] * float(np.abs(dj.values).sum() * cv)
    return lhs, rhs


def convex_double_point(alg, gauge, x, tol=1e-10, n_angles=64):
    """Direction w with equal forward/backward chord lengths from log x.

    Searches the unit circle of a 2-plane inside ker(ad_log x) for a zero
    of the odd function F(W) = t(W) - s(W) (t, s the chord lengths), then
    returns (w = exp(t W) coordinates, report).  Both chord endpoints
    log(x) +- t W land on the gauge boundary, so x . w and w^-1 . x lie
    in the boundary's exponential image.
    """
    from .algebra import ad_kernel_dim, ad_matrix

    X = np.asarray(x, dtype=float)
    d = alg.dim
    if np.allclose(X, 0.0):
        W = np.zeros(d)
        W[0] = 1.0
        t0, s0 = gauge.chord(X, W)
        w = t0 * W
        return w, {"residual": 0.0, "W": W, "t": t0, "s": s0, "bracket": None}

    ad = ad_matrix(alg, X)
    _, s, vt = np.linalg.svd(ad)
    rank = int(np.sum(s > 1e-10 * max(s.max(), 1e-300)))
    kern = vt[rank:]
    if kern.shape[0] < 2:
        raise KernelTooSmall(f"dim ker(ad) = {kern.shape[0]} < 2")

    # 2-plane containing X inside the kernel (X always commutes with itself)
    xhat = X / np.linalg.norm(X)
    others = kern - np.outer(kern @ xhat, xhat)
    norms = np.linalg.norm(others, axis=1)
    V = others[int(np.argmax(norms))]
    V = V / np.linalg.norm(V)

    def F(theta):
        W = np.cos(theta) * xhat + np.sin(theta) * V
        t, sgm = gauge.chord(X, W)
        return t - sgm

    thetas = np.linspace(0.0, np.pi, n_angles + 1)
    vals = [F(th) for th in thetas[:-1]]
    vals.append(-vals[0])  # F is odd under W -> -W
    bracket = None
    for i in range(n_angles):
        if vals[i] == 0.0:
            bracket = (thetas[i], thetas[i])
            root = thetas[i]
            break
        if vals[i] * vals[i + 1] < 0:
            bracket = (thetas[i], thetas[i + 1])
            root = brentq(F, thetas[i], thetas[i + 1], xtol=1e-14)
            break
    if bracket is None:
        raise NoSignChange("no F sign change over the angle scan")
    W = np.cos(root) * xhat + np.sin(root) * V
    t, sgm = gauge.chord(X, W)
    residual = abs(t - sgm)
    report = {
        "residual": residual,
        "W": W,
        "t": t,
        "s": sgm,
        "bracket": bracket,
        "endpoint_dev": (
            abs(gauge(X + t * W) - gauge.level),
            abs(gauge(X - sgm * W) - gauge.level),
        ),
    }
    return t * W, report
