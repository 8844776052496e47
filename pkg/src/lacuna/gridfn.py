"""Regular box grids and grid-sampled functions in exponential coordinates.

Haar measure equals Lebesgue measure in these coordinates, so quadrature
is a plain Riemann sum with the cell volume.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from .errors import InvalidExponent


@dataclass(frozen=True)
class Grid:
    """Axis-aligned box with a regular node lattice (nodes include endpoints)."""

    lo: tuple
    hi: tuple
    shape: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        shape = tuple(int(v) for v in self.shape)
        if not (len(lo) == len(hi) == len(shape)):
            raise ValueError("lo/hi/shape must have equal length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("need lo < hi per axis")
        if any(r < 2 for r in shape):
            raise ValueError("resolution must be >= 2 per axis")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def cube(cls, radius, resolution, dim):
        return cls((-radius,) * dim, (radius,) * dim, (resolution,) * dim)

    @property
    def dim(self):
        return len(self.shape)

    @property
    def spacing(self):
        return tuple(
            (b - a) / (r - 1) for a, b, r in zip(self.lo, self.hi, self.shape)
        )

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def n_nodes(self):
        return int(np.prod(self.shape))

    def axes(self):
        return [np.linspace(a, b, r) for a, b, r in zip(self.lo, self.hi, self.shape)]

    def nodes(self):
        """All node coordinates, shape (n_nodes, dim), C order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def fractional(self, pts):
        """Map physical coordinates to fractional lattice indices."""
        pts = np.asarray(pts, dtype=float)
        lo = np.array(self.lo)
        h = np.array(self.spacing)
        return (pts - lo) / h

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        lo = np.array(self.lo)
        hi = np.array(self.hi)
        return np.all((pts >= lo) & (pts <= hi), axis=-1)


@dataclass
class GridFunction:
    grid: Grid
    values: np.ndarray
    flags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != tuple(self.grid.shape):
            raise ValueError("values shape does not match grid shape")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    def with_values(self, values, flags=None):
        return GridFunction(self.grid, values, self.flags if flags is None else flags)


def from_callable(grid, fn, flags=frozenset()):
    vals = np.asarray(fn(grid.nodes()), dtype=float).reshape(grid.shape)
    return GridFunction(grid, vals, flags)


def quadrature(f):
    return float(f.values.sum() * f.grid.cell_volume)


def lp_norm(f, p):
    """Quadrature L^p norm; p = inf gives the max norm."""
    if p == np.inf or p == "inf":
        return float(np.max(np.abs(f.values)))
    p = float(p)
    if p < 1:
        raise InvalidExponent(f"p must be >= 1 or inf, got {p}")
    return float((np.abs(f.values) ** p).sum() * f.grid.cell_volume) ** (1.0 / p)


def l2_inner(f, g):
    return float((f.values * g.values).sum() * f.grid.cell_volume)


def interpolate(f, pts, order=1):
    """Multilinear interpolation; points outside the box read 0.

    order=3 switches to cubic splines for smooth integrands (used when a
    kinked interpolant would dominate a quadrature error).
    """
    pts = np.asarray(pts, dtype=float)
    flat = pts.reshape(-1, pts.shape[-1])
    idx = f.grid.fractional(flat)
    out = map_coordinates(f.values, idx.T, order=order, mode="constant", cval=0.0)
    return out.reshape(pts.shape[:-1])


def boundary_max(f):
    """Largest |value| on the outermost node shell (support containment check)."""
    vals = np.abs(f.values)
    m = 0.0
    for ax in range(vals.ndim):
        sl = [slice(None)] * vals.ndim
        for edge in (0, -1):
            sl[ax] = edge
            m = max(m, float(vals[tuple(sl)].max()))
    return m
