"""Log-log least-squares fits for decay/growth exponents."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DecayFit:
    """Result of a log2-linear regression.

    ``slope`` holds the named exponent estimate for the experiment that
    produced the fit (rho-hat, gamma-hat, kappa-hat, ...), with the sign
    convention documented by that experiment.  ``samples`` are the raw
    (abscissa, log2 value) pairs that entered the regression.
    """

    slope: float
    intercept: float
    r_squared: float
    samples: tuple
    flags: tuple = ()

    @property
    def ok(self):
        return "rejected" not in self.flags


def fit_loglog(xs, values, min_points=3, slope_sign=1.0):
    """OLS fit of log2(value) against xs; nonpositive values are dropped.

    ``slope_sign`` converts the raw regression slope into the exponent
    convention of the caller (e.g. -1 for a decay exponent reported
    positive).
    """
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > 0
    flags = []
    if not np.all(keep):
        flags.append("zero_data")
    xs, values = xs[keep], values[keep]
    samples = tuple(zip(xs.tolist(), np.log2(values).tolist())) if xs.size else ()
    if xs.size < min_points or np.ptp(xs) == 0:
        return DecayFit(
            slope=float("nan"), intercept=float("nan"), r_squared=0.0,
            samples=samples, flags=tuple(flags + ["rejected"]),
        )
    ys = np.log2(values)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    if ss_tot <= 1e-300:
        r2 = 1.0 if ss_res <= 1e-12 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    r2 = float(min(1.0, max(0.0, r2)))
    return DecayFit(
        slope=float(slope_sign * slope),
        intercept=float(intercept),
        r_squared=r2,
        samples=samples,
        flags=tuple(flags),
    )
