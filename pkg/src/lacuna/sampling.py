"""Low-discrepancy point sets on spheres."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

_GOLDEN = (1.0 + 5.0 ** 0.5) / 2.0


def sphere_points(d, n, seed=None, jitter=0.0):
    """Quasi-uniform points on the Euclidean unit sphere S^(d-1).

    d = 1 alternates +-1; d = 2 uses equally spaced angles with a
    golden-ratio phase; d = 3 the Fibonacci spiral; d >= 4 scrambled
    Sobol points pushed through the Gaussian map.  ``jitter`` adds a
    seeded perturbation (fraction of the mean spacing) where meaningful.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(seed)
    if d == 1:
        return (np.where(np.arange(n) % 2 == 0, 1.0, -1.0)).reshape(n, 1)
    if d == 2:
        theta = 2 * np.pi * ((np.arange(n) + 0.5) / n + (1.0 / _GOLDEN))
        if jitter:
            theta = theta + jitter * (2 * np.pi / n) * rng.uniform(-0.5, 0.5, n)
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    if d == 3:
        i = np.arange(n) + 0.5
        z = 1.0 - 2.0 * i / n
        phi = 2 * np.pi * i * _GOLDEN
        if jitter:
            z = np.clip(z + jitter * (2.0 / n) * rng.uniform(-0.5, 0.5, n), -1, 1)
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    sob = qmc.Sobol(d, scramble=True, seed=rng).random(n)
    g = ndtri(np.clip(sob, 1e-12, 1 - 1e-12))
    norm = np.linalg.norm(g, axis=1, keepdims=True)
    norm[norm == 0] = 1.0
    return g / norm
