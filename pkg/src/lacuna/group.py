"""Group operations in exponential coordinates of the first kind.

Group elements are plain coordinate arrays; the group law is the BCH
series of the underlying algebra, exact at the nilpotency step.
"""

from __future__ import annotations

import numpy as np

from .algebra import bch, _is_exact
from .errors import ConvergenceFailure, NonpositiveScale, OutOfDomain
from .gridfn import interpolate

__all__ = [
    "identity", "multiply", "inverse", "dilate", "hom_norm",
    "quasi_triangle_const", "commutator", "upsilon_compose",
    "upsilon_decompose", "right_derivative", "right_derivative_grid",
]


def identity(alg):
    return np.zeros(alg.dim)


def multiply(alg, x, y):
    """Group product; broadcasts over leading axes in float mode."""
    return bch(alg, x, y)


def inverse(x):
    if _is_exact(x):
        return [-v for v in x]
    return -np.asarray(x, dtype=float)


def dilate(alg, t, x):
    """Automorphic dilation: coordinate j scales by t**lambda_j."""
    t = float(t)
    if t <= 0:
        raise NonpositiveScale(f"dilation scale must be positive, got {t}")
    x = np.asarray(x, dtype=float)
    return x * t ** alg.exponents_float


def hom_norm(alg, x):
    """Homogeneous norm max_j |x_j|^(1/lambda_j).

    Exactly homogeneous and symmetric under inversion; not smooth away
    from 0, which no numerical routine here relies on.
    """
    x = np.asarray(x, dtype=float)
    return np.max(np.abs(x) ** (1.0 / alg.exponents_float), axis=-1)


def quasi_triangle_const(alg, n_samples, seed, radius=1.0):
    """Monte-Carlo lower bound for the quasi-triangle constant C_G.

    Samples pairs uniformly from the homogeneous ball of the given radius
    (which for the max-type norm is a coordinate box) and returns the
    largest observed |x.y| / (|x| + |y|).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    lam = alg.exponents_float
    best = 0.0
    remaining = int(n_samples)
    while remaining > 0:
        m = min(remaining, 200_000)
        x = rng.uniform(-1, 1, size=(m, alg.dim)) * radius ** lam
        y = rng.uniform(-1, 1, size=(m, alg.dim)) * radius ** lam
        denom = hom_norm(alg, x) + hom_norm(alg, y)
        ok = denom > 0
        if not np.any(ok):
            continue  # degenerate pairs are resampled
        ratio = hom_norm(alg, multiply(alg, x[ok], y[ok])) / denom[ok]
        best = max(best, float(ratio.max()))
        remaining -= int(ok.sum())
    return best


def commutator(alg, x, y):
    """Group commutator x.y.x^-1.y^-1."""
    return multiply(alg, multiply(alg, multiply(alg, x, y), inverse(x)), inverse(y))


def upsilon_compose(alg, t):
    """exp(t_n X_n) . ... . exp(t_1 X_1) in coordinates."""
    t = np.asarray(t, dtype=float)
    z = np.zeros(alg.dim)
    for j in range(alg.dim - 1, -1, -1):
        e = np.zeros(alg.dim)
        e[j] = t[j]
        z = multiply(alg, z, e)
    return z


def upsilon_decompose(alg, z, tol=1e-9):
    """Unique t with z = exp(t_n X_n) . ... . exp(t_1 X_1).

    The correction to each coordinate depends only on lower-weight
    parameters, so fixed-point iteration terminates in ``step`` rounds.
    """
    z = np.asarray(z, dtype=float)
    t = z.copy()
    for _ in range(alg.step + 1):
        t = t + (z - upsilon_compose(alg, t))
    err = float(np.max(np.abs(upsilon_compose(alg, t) - z)))
    if err > tol * (1.0 + float(np.max(np.abs(z)))):
        raise ConvergenceFailure(f"upsilon reconstruction error {err}")
    return t


def _basis_step(alg, j, h):
    e = np.zeros(alg.dim)
    e[j] = h
    return e


def right_derivative(alg, g, j, x, h=None):
    """Central-difference right-invariant derivative X_j^R g at x.

    Uses [g(exp(h X_j).x) - g(exp(-h X_j).x)] / 2h with grid interpolation.
    """
    grid = g.grid
    if h is None:
        h = float(np.prod(grid.spacing)) ** (1.0 / grid.dim)
        h = h ** (2.0 / 3.0)
    x = np.asarray(x, dtype=float)
    if not np.all(grid.contains(x)):
        raise OutOfDomain("evaluation point outside the grid box")
    fwd = interpolate(g, multiply(alg, _basis_step(alg, j, h), x))
    bwd = interpolate(g, multiply(alg, _basis_step(alg, j, -h), x))
    return (fwd - bwd) / (2.0 * h)


def right_derivative_grid(alg, g, j, h=None):
    """X_j^R g sampled on g's own lattice (out-of-box reads are 0)."""
    grid = g.grid
    if h is None:
        h = float(np.prod(grid.spacing)) ** (1.0 / grid.dim)
        h = h ** (2.0 / 3.0)
    nodes = grid.nodes()
    fwd = interpolate(g, multiply(alg, _basis_step(alg, j, h), nodes))
    bwd = interpolate(g, multiply(alg, _basis_step(alg, j, -h), nodes))
    vals = ((fwd - bwd) / (2.0 * h)).reshape(grid.shape)
    return g.with_values(vals, flags=frozenset())
