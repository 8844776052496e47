"""Weighted point-cloud measures: construction, dilation, convolution,
density estimation and Fourier decay.

Measures stay singular (clouds) until ``density_estimate`` smooths them;
convolution is exact on clouds up to the resampling cap.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BandwidthTooSmall,
    DegenerateLayer,
    GaugeFailure,
    NotAbelian,
    NotMeanZero,
    NotStratified,
    OutOfDomain,
)
from .algebra import check_stratified
from .fitting import DecayFit, fit_loglog
from .gridfn import GridFunction, interpolate, quadrature
from .group import dilate, hom_norm, inverse, multiply
from .sampling import sphere_points

MEAN_ZERO_RTOL = 1e-10


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite signed weighted point cloud approximating a Borel measure."""

    points: np.ndarray
    weights: np.ndarray
    support_radius: float
    flags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] != w.shape[0] or pts.shape[0] < 1:
            raise ValueError("points and weights must have equal length >= 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        if "mean_zero" in self.flags:
            if abs(self.total_mass) > MEAN_ZERO_RTOL * max(self.total_variation, 1e-300):
                raise NotMeanZero(
                    f"mass {self.total_mass} too large for a mean_zero measure"
                )

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def total_mass(self):
        return float(self.weights.sum())

    @property
    def total_variation(self):
        return float(np.abs(self.weights).sum())


def make_measure(alg, points, weights, flags=(), support_radius=None):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if support_radius is None:
        support_radius = float(np.max(hom_norm(alg, pts)))
    flags = frozenset(flags)
    w = np.asarray(weights, dtype=float).ravel()
    if "mean_zero" not in flags and abs(w.sum()) <= MEAN_ZERO_RTOL * max(
        np.abs(w).sum(), 1e-300
    ):
        flags = flags | {"mean_zero"}
    return DiscreteMeasure(pts, w, float(support_radius), flags)


def point_mass(alg, x, weight=1.0):
    return make_measure(alg, [x], [weight])


# -- surface measures ---------------------------------------------------------

def koranyi_sphere(m, n_points, seed=None):
    """Quasi-uniform sample of the gauge unit sphere |x|^4 + u^2 = 1 in H^m.

    Parametrised by (alpha, omega) with x = sin(alpha)^(1/2) omega and
    u = cos(alpha); the weights carry the surface element induced by the
    ambient Lebesgue measure, normalised to total mass 1.
    """
    from .algebras import heisenberg

    alg = heisenberg(m)
    n = int(n_points)
    i = np.arange(n)
    alpha = np.pi * (i + 0.5) / n
    omega = sphere_points(2 * m, n, seed=seed)
    s, c = np.sin(alpha), np.cos(alpha)
    # dS = sqrt(sin^(2m+1) + sin^(2m-2) cos^2 / 4) d(alpha) d(omega)
    w = np.sqrt(s ** (2 * m + 1) + s ** (2 * m - 2) * c ** 2 / 4.0)
    w = w / w.sum()
    pts = np.concatenate([np.sqrt(s)[:, None] * omega, c[:, None]], axis=1)
    return make_measure(alg, pts, w, support_radius=1.0)


def horizontal_sphere(alg, n_points, seed=None):
    """Uniform unit sphere in the first layer V_1, embedded via exp."""
    ok, cert = check_stratified(alg)
    if not ok:
        raise NotStratified(str(cert))
    v1 = alg.layer_indices(1)
    d = len(v1)
    if d < 2:
        raise DegenerateLayer(f"dim V_1 = {d} < 2")
    sph = sphere_points(d, n_points, seed=seed)
    pts = np.zeros((n_points, alg.dim))
    pts[:, list(v1)] = sph
    w = np.full(n_points, 1.0 / n_points)
    return make_measure(alg, pts, w, support_radius=1.0)


def tilted_sphere(m, v, n_points, seed=None):
    """Sphere S^(2m-1) tilted into the center: points (y, <v, y>) in H^m."""
    from .algebras import heisenberg

    alg = heisenberg(m)
    v = np.asarray(v, dtype=float)
    y = sphere_points(2 * m, n_points, seed=seed)
    u = y @ v
    pts = np.concatenate([y, u[:, None]], axis=1)
    w = np.full(n_points, 1.0 / n_points)
    return make_measure(alg, pts, w)


def curve_measure(alg, parametrization, n_points, density=None):
    """Composite-midpoint sample of a density along exp(parametrization)."""
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    t = (np.arange(n_points) + 0.5) / n_points
    pts = np.asarray([parametrization(ti) for ti in t], dtype=float)
    if pts.shape != (n_points, alg.dim):
        raise ValueError("parametrization must return algebra-dim vectors")
    w = np.ones(n_points) if density is None else np.asarray([density(ti) for ti in t])
    w = w / w.sum()
    return make_measure(alg, pts, w)


class ConvexGauge:
    """Convex body Omega = {g < level} with boundary Sigma = {g = level}.

    ``chord(X, W)`` returns the unique t, s > 0 with X + tW and X - sW on
    Sigma, for X interior.
    """

    def __init__(self, func, level=1.0, max_radius=100.0):
        self.func = func
        self.level = float(level)
        self.max_radius = float(max_radius)

    def __call__(self, x):
        return float(self.func(np.asarray(x, dtype=float)))

    def _hit(self, X, W):
        f = lambda t: self(X + t * W) - self.level
        if f(0.0) >= 0:
            raise GaugeFailure("base point is not interior to the body")
        t_hi = 1.0
        while f(t_hi) < 0:
            t_hi *= 2.0
            if t_hi > self.max_radius:
                raise GaugeFailure("no boundary crossing within max_radius")
        return float(brentq(f, t_hi / 2.0 if f(t_hi / 2.0) < 0 else 0.0, t_hi,
                            xtol=1e-13, rtol=1e-14))

    def chord(self, X, W):
        X = np.asarray(X, dtype=float)
        W = np.asarray(W, dtype=float)
        return self._hit(X, W), self._hit(X, -W)


def euclidean_ball_gauge(radius=1.0):
    return ConvexGauge(lambda x: float(np.dot(x, x)) / radius ** 2)


def koranyi_ball_gauge(m=1):
    def g(z):
        x, u = z[: 2 * m], z[2 * m]
        return float(np.dot(x, x) ** 2 + u * u)

    return ConvexGauge(g)


def convex_boundary_measure(alg, gauge, n_points, seed=None, fd_eps=1e-5):
    """Surface-measure sample of exp(boundary of a convex body around 0)."""
    n = int(n_points)
    d = alg.dim
    omega = sphere_points(d, n, seed=seed)
    r = np.empty(n)
    for i in range(n):
        r[i] = gauge._hit(np.zeros(d), omega[i])

    # surface element of the radial graph: dS = r^(d-2) sqrt(r^2 + |grad_S r|^2)
    w = np.empty(n)
    eye = np.eye(d)
    for i in range(n):
        om = omega[i]
        # orthonormal tangent frame at om
        basis = np.linalg.qr(
            np.concatenate([om[:, None], eye[:, np.argsort(np.abs(om))[:-1]]], axis=1)
        )[0][:, 1:]
        grad2 = 0.0
        for t in range(d - 1):
            wp = om + fd_eps * basis[:, t]
            wm = om - fd_eps * basis[:, t]
            rp = gauge._hit(np.zeros(d), wp / np.linalg.norm(wp))
            rm = gauge._hit(np.zeros(d), wm / np.linalg.norm(wm))
            grad2 += ((rp - rm) / (2 * fd_eps)) ** 2
        w[i] = r[i] ** (d - 2) * np.sqrt(r[i] ** 2 + grad2)
    w = w / w.sum()
    return make_measure(alg, omega * r[:, None], w)


# -- cloud operations ---------------------------------------------------------

def dilate_measure(alg, k, sigma):
    """2^k-dilate: points mapped by delta_(2^k), weights unchanged."""
    t = 2.0 ** k
    pts = dilate(alg, t, sigma.points)
    return DiscreteMeasure(pts, sigma.weights.copy(),
                           sigma.support_radius * t, sigma.flags)


def reflect_measure(sigma):
    """Pushforward under x -> x^-1 (coordinate negation)."""
    return DiscreteMeasure(-sigma.points, sigma.weights.copy(),
                           sigma.support_radius, sigma.flags)


def _systematic_pairs(wa, wb, m, rng):
    """Systematic resampling of m index pairs from the product |wa| x |wb|."""
    aa, ab = np.abs(wa), np.abs(wb)
    row_tot = aa * ab.sum()
    cum_rows = np.cumsum(row_tot)
    cum_b = np.cumsum(ab)
    total = cum_rows[-1]
    pos = (np.arange(m) + rng.random()) * (total / m)
    i = np.searchsorted(cum_rows, pos, side="right")
    i = np.minimum(i, len(wa) - 1)
    offset = pos - np.where(i > 0, cum_rows[i - 1], 0.0)
    # column position within row i: offset = aa[i] * cum_b[j]
    j = np.searchsorted(cum_b, offset / np.maximum(aa[i], 1e-300), side="right")
    j = np.minimum(j, len(wb) - 1)
    return i, j


def convolve_measures(alg, sigma, tau, max_points=200_000, seed=None):
    """Product cloud {(x_i . y_j, w_i v_j)} with importance resampling.

    When the full product exceeds ``max_points`` the cloud is resampled
    systematically on |weight|; the total mass and total variation of the
    signed measure are preserved exactly by reweighting the positive and
    negative picks separately.
    """
    if max_points < 1:
        raise ValueError("max_points must be >= 1")
    P, Q = sigma.size, tau.size
    if P * Q <= max_points:
        pts = multiply(alg, sigma.points[:, None, :], tau.points[None, :, :])
        pts = pts.reshape(P * Q, alg.dim)
        w = np.outer(sigma.weights, tau.weights).ravel()
        return make_measure(alg, pts, w)

    rng = np.random.default_rng(seed)
    i, j = _systematic_pairs(sigma.weights, tau.weights, max_points, rng)
    pts = multiply(alg, sigma.points[i], tau.points[j])
    sgn = np.sign(sigma.weights[i] * tau.weights[j])

    wp_a, wn_a = np.clip(sigma.weights, 0, None), np.clip(-sigma.weights, 0, None)
    wp_b, wn_b = np.clip(tau.weights, 0, None), np.clip(-tau.weights, 0, None)
    s_pos = wp_a.sum() * wp_b.sum() + wn_a.sum() * wn_b.sum()
    s_neg = wp_a.sum() * wn_b.sum() + wn_a.sum() * wp_b.sum()
    n_pos = int(np.sum(sgn > 0))
    n_neg = int(np.sum(sgn < 0))
    if (s_pos > 0 and n_pos == 0) or (s_neg > 0 and n_neg == 0):
        # force one representative of a missed sign class
        want = 1.0 if n_pos == 0 else -1.0
        ii = int(np.argmax(np.abs(sigma.weights)))
        cand = np.sign(sigma.weights[ii]) * tau.weights
        jj = int(np.argmax(np.where(np.sign(cand) == want, np.abs(cand), -1)))
        pts[-1] = multiply(alg, sigma.points[ii], tau.points[jj])
        sgn[-1] = want
        n_pos = int(np.sum(sgn > 0))
        n_neg = int(np.sum(sgn < 0))
    w = np.where(sgn > 0, s_pos / max(n_pos, 1), -s_neg / max(n_neg, 1))
    w[sgn == 0] = 0.0
    return make_measure(alg, pts, w)


def conv_product(alg, sigma, N, max_points=200_000, seed=None):
    """Alternating convolution powers: sigma^(0) = sigma,
    sigma^(N) = sigma^(N-1) * reflect(sigma) for odd N, * sigma for even N.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    out = sigma
    refl = reflect_measure(sigma)
    for n in range(1, N + 1):
        factor = refl if n % 2 == 1 else sigma
        out = convolve_measures(alg, out, factor, max_points=max_points,
                                seed=None if seed is None else seed + n)
    return out


def conv_factor_signs(N):
    """Factor sequence of sigma^(N) as 's'/'r' (measure / reflection)."""
    seq = ["s"]
    for n in range(1, N + 1):
        seq.append("r" if n % 2 == 1 else "s")
    return "".join(seq)


# -- densities and moduli -----------------------------------------------------

def _bspline3(u):
    """Cubic B-spline bump, support [-2, 2], unit integral."""
    a = np.abs(u)
    out = np.zeros_like(a)
    m1 = a < 1
    m2 = (a >= 1) & (a < 2)
    out[m1] = 2.0 / 3.0 - a[m1] ** 2 + 0.5 * a[m1] ** 3
    out[m2] = (2.0 - a[m2]) ** 3 / 6.0
    return out


def density_estimate(alg, sigma, grid, bandwidth):
    """Kernel-smoothed density of the cloud on the grid.

    Product cubic B-spline kernel per axis; quadrature of the output
    matches the total mass within the smoothing-contract tolerance.
    """
    bw = np.broadcast_to(np.asarray(bandwidth, dtype=float), (grid.dim,)).copy()
    if np.any(bw <= 0):
        raise ValueError("bandwidth must be positive")
    h = np.array(grid.spacing)
    bw = np.maximum(bw, h)  # at least one cell, else the kernel misses nodes

    med = np.median(sigma.points, axis=0)
    near = np.all(np.abs(sigma.points - med) <= bw, axis=1)
    if int(near.sum()) < 8 and sigma.size >= 8:
        raise BandwidthTooSmall(
            f"only {int(near.sum())} points within one bandwidth of the median"
        )

    vals = np.zeros(grid.shape)
    lo = np.array(grid.lo)
    shape = np.array(grid.shape)
    halfwin = np.ceil(2.0 * bw / h).astype(int)
    for p, w in zip(sigma.points, sigma.weights):
        center = (p - lo) / h
        i0 = np.maximum(np.floor(center).astype(int) - halfwin, 0)
        i1 = np.minimum(np.floor(center).astype(int) + halfwin + 2, shape)
        if np.any(i0 >= i1):
            continue
        axes_k = []
        for ax in range(grid.dim):
            idx = np.arange(i0[ax], i1[ax])
            u = (lo[ax] + idx * h[ax] - p[ax]) / bw[ax]
            axes_k.append(_bspline3(u) / bw[ax])
        if grid.dim == 1:
            ker = axes_k[0]
        elif grid.dim == 2:
            ker = axes_k[0][:, None] * axes_k[1][None, :]
        else:
            ker = (axes_k[0][:, None, None] * axes_k[1][None, :, None]
                   * axes_k[2][None, None, :])
        sl = tuple(slice(a, b) for a, b in zip(i0, i1))
        vals[sl] += w * ker
    return GridFunction(grid, vals)


def ca_modulus(alg, h, y, mass_check=0.05):
    """L1 moduli of continuity of a density under right/left translation.

    Returns (left, right) with left = integral |h(x.y^-1) - h(x)| dx and
    right = integral |h(y^-1.x) - h(x)| dx.  Raises OutOfDomain when the
    translated support escapes the grid (detected by loss of translated
    L1 mass beyond ``mass_check``).
    """
    grid = h.grid
    nodes = grid.nodes()
    yinv = inverse(np.asarray(y, dtype=float))
    cv = grid.cell_volume
    base_l1 = float(np.abs(h.values).sum() * cv)

    out = []
    for trans in (multiply(alg, nodes, yinv), multiply(alg, yinv, nodes)):
        shifted = interpolate(h, trans).reshape(grid.shape)
        l1 = float(np.abs(shifted).sum() * cv)
        if base_l1 > 0 and abs(l1 - base_l1) > mass_check * base_l1:
            raise OutOfDomain(
                f"translated support escapes the grid (L1 {l1:.3g} vs {base_l1:.3g})"
            )
        out.append(float(np.abs(shifted - h.values).sum() * cv))
    return out[0], out[1]


def hom_sphere_directions(alg, n, seed=None):
    """Directions of homogeneous norm exactly 1."""
    omega = sphere_points(alg.dim, n, seed=seed)
    norms = hom_norm(alg, omega)
    return np.stack([dilate(alg, 1.0 / nm, om) for om, nm in zip(omega, norms)])


def ca_exponent_fit(alg, sigma, N, radii, grid, bandwidth, seed=None,
                    max_points=30_000, n_directions=6, resolution=25):
    """Fit the translation-modulus exponent gamma of the smoothed N-th
    convolution power: modulus(r) ~ C r^gamma.

    grid = None fits an axis-aligned box around the convolution power with
    margin for the bandwidth and the translations, at the given resolution.
    """
    radii = np.asarray(radii, dtype=float)
    if len(radii) < 4 or np.log2(radii.max() / radii.min()) < 2:
        raise ValueError("need >= 4 radii spanning >= 2 octaves")
    power = conv_product(alg, sigma, N, max_points=max_points, seed=seed)
    if grid is None:
        lo = power.points.min(axis=0)
        hi = power.points.max(axis=0)
        span = np.maximum(hi - lo, 1e-6)
        margin = np.broadcast_to(bandwidth, (alg.dim,)) * 2.5 \
            + radii.max() * (1.0 + 0.5 * span)
        from .gridfn import Grid

        grid = Grid(tuple(lo - margin), tuple(hi + margin),
                    (int(resolution),) * alg.dim)
    h = density_estimate(alg, power, grid, bandwidth)
    dirs = hom_sphere_directions(alg, n_directions, seed=seed)
    vals = []
    for r in radii:
        tot = 0.0
        for d in dirs:
            y = dilate(alg, r, d)
            left, right = ca_modulus(alg, h, y)
            tot += left + right
        vals.append(tot / len(dirs))
    fit = fit_loglog(np.log2(radii), vals)
    flags = fit.flags
    if fit.ok and fit.slope < 0.05:
        flags = flags + ("no_decay",)
    return DecayFit(fit.slope, fit.intercept, fit.r_squared, fit.samples, flags)


# -- Euclidean Fourier analysis -----------------------------------------------

def fourier_transform(alg, sigma, xi):
    """sigma-hat(xi) = sum w_i exp(-2 pi i x_i . xi); abelian groups only."""
    if not alg.is_abelian:
        raise NotAbelian("the Euclidean transform requires an abelian ambient group")
    xi = np.asarray(xi, dtype=float)
    phase = sigma.points @ np.atleast_2d(xi).reshape(-1, alg.dim).T
    out = (sigma.weights[:, None] * np.exp(-2j * np.pi * phase)).sum(axis=0)
    return out.reshape(np.shape(xi)[:-1]) if np.ndim(xi) > 1 else complex(out[0])


def fourier_decay_fit(alg, sigma, freq_radii, directions_per_radius, seed=None,
                      band_periods=1.5):
    """Fit |sigma-hat| ~ R^(-kappa) from per-radius maxima.

    At each nominal radius the transform is sampled over quasi-uniform
    directions and a short radial band containing ``band_periods``
    oscillations of the transform (period ~ 1 / (2 support_radius)), and
    the max is taken; this reads the decay envelope rather than the zeros
    of an oscillatory transform.
    """
    if not alg.is_abelian:
        raise NotAbelian("fourier_decay_fit requires an abelian ambient group")
    radii = np.asarray(freq_radii, dtype=float)
    if len(radii) < 3 or np.log2(radii.max() / radii.min()) < 3:
        raise ValueError("freq_radii must span >= 3 octaves")
    dirs = sphere_points(alg.dim, directions_per_radius, seed=seed)
    rho = max(sigma.support_radius, 1e-12)
    step = 1.0 / (16.0 * rho)  # 8 samples per oscillation of the phase
    offsets = step * np.arange(int(np.ceil(16 * band_periods / 2)) + 1)
    vals = []
    for R in radii:
        xi = (dirs[None, :, :] * (R + offsets)[:, None, None]).reshape(-1, alg.dim)
        vals.append(float(np.abs(fourier_transform(alg, sigma, xi)).max()))
    fit = fit_loglog(np.log2(radii), vals, slope_sign=-1.0)
    flags = fit.flags
    if fit.ok:
        if fit.slope < 0.05:
            flags = flags + ("no_decay",)
        xs = np.array([s[0] for s in fit.samples])
        ys = np.array([s[1] for s in fit.samples])
        if len(xs) >= 6:
            half = len(xs) // 2
            s1 = np.polyfit(xs[:half], ys[:half], 1)[0]
            s2 = np.polyfit(xs[half:], ys[half:], 1)[0]
            if s2 < 1.5 * s1 - 0.5:
                flags = flags + ("super_polynomial",)
    return DecayFit(fit.slope, fit.intercept, fit.r_squared, fit.samples, flags)


# -- serialization ------------------------------------------------------------

def dump_measure(sigma):
    return {
        "points": sigma.points.tolist(),
        "weights": sigma.weights.tolist(),
        "support_radius": sigma.support_radius,
        "flags": sorted(sigma.flags),
    }


def load_measure(source):
    doc = source if isinstance(source, dict) else json.load(open(source))
    return DiscreteMeasure(
        np.asarray(doc["points"], dtype=float),
        np.asarray(doc["weights"], dtype=float),
        float(doc["support_radius"]),
        frozenset(doc.get("flags", [])),
    )
