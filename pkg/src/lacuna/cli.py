"""Command line front end: builds algebras and measures, runs the grid
experiments, and persists deterministic artifacts (CSV tables, JSON
summaries, plot-ready fit files, and a hashed manifest).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import ad_kernel_dim, check_stratified, generator_test
from .algebras import get_algebra
from .errors import (
    DimensionMismatch,
    LacunaError,
    MissingField,
    ParseError,
    UnknownExperiment,
)
from .fitting import DecayFit
from .gridfn import Grid, from_callable, lp_norm, quadrature
from .group import hom_norm
from . import measure as measure_mod
from . import operator as operator_mod
from . import verify as verify_mod

EXPERIMENTS = {
    "algebra": ("check", "gentest", "adkernel", "stratified"),
    "measure": ("build", "convpow", "ca", "fourier"),
    "op": ("average", "maximal", "psi", "norm"),
    "verify": ("l2decay", "ao", "hormander", "meanvalue", "convexchord"),
}

_CONFIG_KEYS = {"experiment", "algebra", "measure", "grid", "params",
                "out", "seed", "threads"}
_MEASURE_KEYS = {"kind", "n_points", "seed", "m", "v", "degree", "weight"}
_GRID_KEYS = {"radius", "resolution"}


@dataclass
class ExperimentConfig:
    experiment: str
    algebra: str = "heisenberg1"
    measure: dict = field(default_factory=lambda: {"kind": "koranyi", "n_points": 200})
    grid: dict = field(default_factory=lambda: {"radius": 4.0, "resolution": 64})
    params: dict = field(default_factory=dict)
    out: str = None
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        section, _, name = self.experiment.partition(".")
        if section not in EXPERIMENTS or name not in EXPERIMENTS[section]:
            raise UnknownExperiment(f"no experiment named {self.experiment!r}")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ParseError("seed must be a 64-bit unsigned integer")


def parse_config(path=None, overrides=None):
    """Load a JSON config, apply flag overrides (flags win), validate."""
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}:{e.lineno}:{e.colno}: {e.msg}")
        if not isinstance(doc, dict):
            raise ParseError(f"{path}: top level must be an object")
    for key in doc:
        if key not in _CONFIG_KEYS:
            raise ParseError(f"unknown config key {key!r}")
    for sub, allowed in (("measure", _MEASURE_KEYS), ("grid", _GRID_KEYS)):
        for key in doc.get(sub, {}):
            if key not in allowed:
                raise ParseError(f"unknown config key {sub}.{key!r}")
    merged = dict(doc)
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ("measure", "grid", "params"):
                merged.setdefault(key, {})
                merged[key] = {**merged[key], **value}
            else:
                merged[key] = value
    if "experiment" not in merged:
        raise MissingField("config must name an experiment")
    return ExperimentConfig(**merged)


# -- input builders -----------------------------------------------------------

def _build_grid(config, alg):
    g = {"radius": 4.0, "resolution": 64, **config.grid}
    return Grid.cube(float(g["radius"]), int(g["resolution"]), alg.dim)


def _default_bump(alg, grid):
    """Smooth unit-mass bump supported in the central quarter of the grid."""
    r = 0.25 * min(b - a for a, b in zip(grid.lo, grid.hi))

    def fn(x):
        s = (x ** 2).sum(axis=-1) / r ** 2
        return np.where(s < 1, np.exp(1.0 - 1.0 / np.maximum(1 - s, 1e-300)), 0.0)

    phi = from_callable(grid, fn)
    return phi.with_values(phi.values / quadrature(phi))


def _build_psi(alg, config):
    res = int(config.params.get("psi_resolution", 65 if alg.dim <= 2 else 33))
    radius = float(config.params.get("psi_radius", 2.0))
    grid = Grid.cube(radius, res, alg.dim)
    phi = _default_bump(alg, grid)
    psi = operator_mod.build_psi(alg, phi, t_nodes=int(config.params.get("t_nodes", 64)))
    stride = int(config.params.get("psi_stride", 1 if alg.dim == 1 else 2))
    return psi, operator_mod.psi_cloud(alg, psi, threshold=1e-13, stride=stride)


def _check_dim(alg, sigma):
    if sigma.points.shape[1] != alg.dim:
        raise DimensionMismatch(
            f"measure lives in dimension {sigma.points.shape[1]}, "
            f"algebra has dimension {alg.dim}")
    return sigma


def _build_measure(alg, config):
    spec = {"kind": "koranyi", "n_points": 200, **config.measure}
    kind = spec["kind"]
    n = int(spec.get("n_points", 200))
    seed = int(spec.get("seed", config.seed))
    if kind == "koranyi":
        return _check_dim(alg, measure_mod.koranyi_sphere(
            int(spec.get("m", 1)), n, seed=seed))
    if kind == "horizontal":
        return measure_mod.horizontal_sphere(alg, n, seed=seed)
    if kind == "tilted":
        m = int(spec.get("m", 1))
        v = spec.get("v", [0.3] + [0.0] * (2 * m - 1))
        return _check_dim(alg, measure_mod.tilted_sphere(m, v, n, seed=seed))
    if kind == "moment":
        # moment curve in the first layer, constant elsewhere
        v1 = list(alg.layer_indices(1))

        def gamma(t):
            out = np.zeros(alg.dim)
            for p, idx in enumerate(v1):
                out[idx] = (2 * t - 1) ** (p + 1)
            return out

        return measure_mod.curve_measure(alg, gamma, n)
    if kind == "line":
        v1 = list(alg.layer_indices(1))

        def gamma(t):
            out = np.zeros(alg.dim)
            out[v1[0]] = 2 * t - 1
            return out

        return measure_mod.curve_measure(alg, gamma, n)
    if kind == "center":
        idx = alg.dim - 1
        pts = np.zeros((n, alg.dim))
        pts[:, idx] = np.linspace(-1, 1, n)
        return measure_mod.make_measure(alg, pts, np.full(n, 1.0 / n))
    if kind == "bump":
        grid = Grid.cube(1.0, max(9, int(round(n ** (1.0 / alg.dim)))), alg.dim)
        phi = _default_bump(alg, grid)
        cloud = operator_mod.psi_cloud(alg, phi, threshold=1e-13)
        return measure_mod.make_measure(alg, cloud.points,
                                        cloud.weights / cloud.total_mass)
    if kind == "pointmass":
        return measure_mod.point_mass(alg, np.zeros(alg.dim))
    raise ParseError(f"unknown measure kind {kind!r}")


def _mean_zero_version(alg, sigma, config):
    """sigma minus a bump of equal mass (mean-zero input for decay runs).

    The bump cloud must be at least as fine as the analysis grid or its
    spurious high-frequency content dominates the large-gap norms.
    """
    res = 65 if alg.dim == 1 else (33 if alg.dim == 2 else 21)
    grid = Grid.cube(max(1.0, sigma.support_radius), res, alg.dim)
    phi = _default_bump(alg, grid)
    cloud = operator_mod.psi_cloud(alg, phi, threshold=1e-13)
    pts = np.vstack([sigma.points, cloud.points])
    w = np.concatenate([
        sigma.weights,
        -cloud.weights * (sigma.total_mass / cloud.total_mass),
    ])
    return measure_mod.make_measure(alg, pts, w, flags={"mean_zero"})


def _parse_range(text):
    """'0..8' -> [0, ..., 8]; comma lists pass through."""
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    text = str(text)
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    return [int(v) for v in text.split(",")]


# -- runners ------------------------------------------------------------------

def _fit_record(fit):
    return {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "flags": sorted(fit.flags),
        "n_samples": len(fit.samples),
    }


def _run_algebra(name, alg, config):
    if name == "check":
        # construction already validates antisymmetry, grading and Jacobi
        return {"valid": True, "dim": alg.dim, "step": alg.step,
                "Q": float(alg.Q)}, {}, {}, False
    if name == "stratified":
        ok, cert = check_stratified(alg)
        return {"stratified": ok, **{k: v for k, v in cert.items() if k != "stratified"}}, {}, {}, not ok
    if name == "adkernel":
        n = int(config.params.get("n_samples", 1000))
        rng = np.random.default_rng(config.seed)
        dims = [ad_kernel_dim(alg, x) for x in rng.standard_normal((n, alg.dim))]
        rows = [{"sample": i, "kernel_dim": d} for i, d in enumerate(dims)]
        summary = {"min_kernel_dim": int(min(dims)), "n_samples": n,
                   "all_at_least_2": bool(min(dims) >= 2)}
        return summary, {"adkernel": rows}, {}, min(dims) < 2
    if name == "gentest":
        sigma = _build_measure(alg, config)
        ok, report = generator_test(alg, sigma.points)
        return {"generates": ok, **{k: v for k, v in report.items()
                                    if k != "generates"}}, {}, {}, not ok
    raise UnknownExperiment(name)


def _run_measure(name, alg, config):
    sigma = _build_measure(alg, config)
    if name == "build":
        rows = [{"index": i,
                 **{f"x{j+1}": float(p[j]) for j in range(alg.dim)},
                 "weight": float(w)}
                for i, (p, w) in enumerate(zip(sigma.points, sigma.weights))]
        summary = {"size": sigma.size, "total_mass": sigma.total_mass,
                   "total_variation": sigma.total_variation,
                   "support_radius": sigma.support_radius,
                   "flags": sorted(sigma.flags)}
        return summary, {"points": rows}, {}, False
    if name == "convpow":
        N = int(config.params.get("N", 2))
        cap = int(config.params.get("max_points", 30_000))
        power = measure_mod.conv_product(alg, sigma, N, max_points=cap,
                                         seed=config.seed)
        summary = {"N": N, "size": power.size, "total_mass": power.total_mass,
                   "total_variation": power.total_variation,
                   "support_radius": float(np.max(hom_norm(alg, power.points))),
                   "factor_signs": measure_mod.conv_factor_signs(N)}
        return summary, {}, {}, False
    if name == "ca":
        N = int(config.params.get("N", 2))
        radii = [float(r) for r in config.params.get(
            "radii", [0.05, 0.08, 0.125, 0.2, 0.32, 0.5])]
        bw = float(config.params.get("bandwidth", 0.25))
        fit = measure_mod.ca_exponent_fit(
            alg, sigma, N, radii, None, bw, seed=config.seed,
            max_points=int(config.params.get("max_points", 30_000)),
            n_directions=int(config.params.get("n_directions", 4)),
            resolution=int(config.grid.get("resolution", 25)))
        rows = [{"log2_radius": x, "log2_modulus": y} for x, y in fit.samples]
        return {"N": N, "gamma_hat": fit.slope, **_fit_record(fit)}, \
            {"moduli": rows}, {"ca": fit}, not fit.ok or fit.slope <= 0
    if name == "fourier":
        radii = [float(r) for r in config.params.get(
            "freq_radii", [2.0, 4.0, 8.0, 16.0, 32.0])]
        fit = measure_mod.fourier_decay_fit(
            alg, sigma, radii, int(config.params.get("directions", 32)),
            seed=config.seed)
        rows = [{"log2_radius": x, "log2_max_transform": y} for x, y in fit.samples]
        return {"kappa_hat": fit.slope, **_fit_record(fit)}, \
            {"transform": rows}, {"fourier": fit}, not fit.ok
    raise UnknownExperiment(name)


def _run_op(name, alg, config):
    grid = _build_grid(config, alg)
    if name == "psi":
        psi, cloud = _build_psi(alg, config)
        summary = {"quad_psi": quadrature(psi),
                   "max_abs": lp_norm(psi, np.inf),
                   "l1_norm": lp_norm(psi, 1),
                   "cloud_size": cloud.size,
                   "cloud_mass": cloud.total_mass}
        return summary, {}, {}, abs(quadrature(psi)) > 1e-6
    sigma = _build_measure(alg, config)
    f = _default_bump(alg, grid)
    if name == "average":
        out = operator_mod.average(alg, f, sigma)
        summary = {"l1": lp_norm(out, 1), "l2": lp_norm(out, 2),
                   "sup": lp_norm(out, np.inf),
                   "input_l2": lp_norm(f, 2)}
        return summary, {}, {}, False
    if name == "maximal":
        k_lo, k_hi = _parse_range(config.params.get("window", "-2..2"))[0], \
            _parse_range(config.params.get("window", "-2..2"))[-1]
        out = operator_mod.lacunary_maximal(alg, f, sigma, k_lo, k_hi)
        summary = {"k_lo": k_lo, "k_hi": k_hi,
                   "l2": lp_norm(out, 2), "sup": lp_norm(out, np.inf),
                   "input_l2": lp_norm(f, 2)}
        return summary, {}, {}, False
    if name == "norm":
        est = operator_mod.op_norm_l2(
            alg, sigma, grid,
            iters=int(config.params.get("iters", 20)),
            tol=float(config.params.get("tol", 1e-5)),
            seed=config.seed,
            restarts=int(config.params.get("restarts", 2)),
            collar=float(config.params.get("collar", 0.0)))
        return {"op_norm_l2": est,
                "total_variation": sigma.total_variation}, {}, {}, False
    raise UnknownExperiment(name)


def _run_verify(name, alg, config):
    grid = _build_grid(config, alg)
    if name == "l2decay":
        gaps = _parse_range(config.params.get("gaps", "0..4"))
        _, cloud = _build_psi(alg, config)
        sigma = _build_measure(alg, config)
        theta = sigma if "mean_zero" in sigma.flags else \
            _mean_zero_version(alg, sigma, config)
        fit, norms = verify_mod.l2_decay_experiment(
            alg, cloud, theta, gaps, grid,
            iters=int(config.params.get("iters", 15)),
            seed=config.seed,
            max_points=int(config.params.get("max_points", 40_000)),
            tol=float(config.params.get("tol", 1e-4)),
            restarts=int(config.params.get("restarts", 2)),
            collar=float(config.params.get("collar", 0.0)))
        rows = [{"gap": g, "op_norm": nm} for g, nm in zip(gaps, norms)]
        return {"rho_hat": fit.slope, **_fit_record(fit)}, \
            {"norms": rows}, {"l2decay": fit}, not fit.ok or fit.slope <= 0
    if name == "ao":
        _, cloud = _build_psi(alg, config)
        sigma = _build_measure(alg, config)
        nu = sigma if "mean_zero" in sigma.flags else \
            _mean_zero_version(alg, sigma, config)
        js = _parse_range(config.params.get("js", "0,0,0,0"))
        ks = _parse_range(config.params.get("ks", "0,1,2,3"))
        ells = _parse_range(config.params.get("ells", "0,1,2,3"))
        triples = [(j, k, ell) for j, k, ell in zip(js, ks, ells)]
        table, fit_ell, fit_gap = verify_mod.almost_orthogonality_experiment(
            alg, nu, cloud, triples, grid, seed=config.seed,
            iters=int(config.params.get("iters", 12)),
            tol=float(config.params.get("tol", 1e-4)),
            max_points=int(config.params.get("max_points", 40_000)))
        finding = not (fit_ell.ok and fit_gap.ok
                       and fit_ell.slope > 0 and fit_gap.slope > 0)
        return {"rho_hat_ell": fit_ell.slope, "rho_hat_gap": fit_gap.slope,
                "fit_ell": _fit_record(fit_ell),
                "fit_gap": _fit_record(fit_gap)}, \
            {"norms": table}, {"ao_ell": fit_ell, "ao_gap": fit_gap}, finding
    if name == "hormander":
        psi, _ = _build_psi(alg, config)
        sigma = _build_measure(alg, config)
        ells = _parse_range(config.params.get("ells", "-3..0"))
        k_window = _parse_range(config.params.get("window", "-4..24"))
        rays = [float(r) for r in config.params.get("rays", [0.25, 0.5, 1.0, 2.0])]
        direction = np.zeros(alg.dim)
        direction[0] = 1.0
        rows = []
        for ell in ells:
            for r in rays:
                total, per_k = verify_mod.hormander_sum(
                    alg, psi, sigma, ell, r * direction, k_window, grid,
                    seed=config.seed)
                rows.append({"ell": ell, "y_norm": r, "sum": total,
                             "max_term": max(per_k.values())})
        sums_by_ell = {}
        for row in rows:
            sums_by_ell.setdefault(row["ell"], []).append(row["sum"])
        sup_by_ell = {ell: max(v) for ell, v in sums_by_ell.items()}
        summary = {"sup_sum_by_ell": {str(k): v for k, v in sorted(sup_by_ell.items())}}
        return summary, {"sums": rows}, {}, False
    if name == "meanvalue":
        g = _default_bump(alg, grid)
        steps = int(config.params.get("steps", 4))
        base = float(config.params.get("z0", 0.4))
        direction = np.array(config.params.get(
            "direction", [1.0] + [0.0] * (alg.dim - 1)), dtype=float)
        rows = []
        for i in range(steps):
            z = (base * 2.0 ** (-i)) * direction
            lhs, rhs = verify_mod.mean_value_check(alg, g, z)
            rows.append({"step": i, "z_norm": float(hom_norm(alg, z)),
                         "lhs": lhs, "rhs": rhs,
                         "ratio": lhs / rhs if rhs else float("inf")})
        summary = {"final_ratio": rows[-1]["ratio"],
                   "max_ratio": max(r["ratio"] for r in rows)}
        return summary, {"ratios": rows}, {}, False
    if name == "convexchord":
        kind = config.params.get("gauge", "euclidean")
        if kind == "euclidean":
            gauge = measure_mod.euclidean_ball_gauge(
                float(config.params.get("radius", 1.0)))
        elif kind == "koranyi":
            gauge = measure_mod.koranyi_ball_gauge(int(config.measure.get("m", 1)))
        else:
            raise ParseError(f"unknown gauge kind {kind!r}")
        x = np.array(config.params.get(
            "x", [0.3] + [0.0] * (alg.dim - 1)), dtype=float)
        tol = float(config.params.get("tol", 1e-8))
        w, report = verify_mod.convex_double_point(alg, gauge, x, tol=tol)
        summary = {"w": [float(v) for v in w],
                   "residual": report["residual"],
                   "t": report["t"], "s": report["s"],
                   "endpoint_dev": list(report.get("endpoint_dev", (0.0, 0.0))),
                   "bracket": list(report["bracket"]) if report["bracket"] else None}
        return summary, {}, {}, report["residual"] > tol
    raise UnknownExperiment(name)


_RUNNERS = {"algebra": _run_algebra, "measure": _run_measure,
            "op": _run_op, "verify": _run_verify}


def run_experiment(config, force=False):
    """Execute the configured driver; returns (exit_code, results)."""
    section, _, name = config.experiment.partition(".")
    t0 = time.monotonic()
    try:
        alg = get_algebra(config.algebra)
        summary, tables, fits, finding = _RUNNERS[section](name, alg, config)
    except LacunaError as e:
        record = {"error": type(e).__name__, "message": str(e),
                  "experiment": config.experiment}
        if config.out:
            out = Path(config.out)
            out.mkdir(parents=True, exist_ok=True)
            out.joinpath("error.json").write_text(_dumps(record) + "\n")
        print(_dumps(record), file=sys.stderr)
        return 1, record
    # wall time goes to stderr only: artifacts must be byte-reproducible
    print(f"{config.experiment}: {time.monotonic() - t0:.2f}s", file=sys.stderr)
    results = {"summary": summary, "tables": tables, "fits": fits,
               "finding": bool(finding)}
    if config.out:
        write_report(results, config.out, config, force=force)
    return (2 if finding else 0), results


def _dumps(obj):
    def default(v):
        if isinstance(v, (np.integer,)):
            return int(v)
        if isinstance(v, (np.floating,)):
            return float(v)
        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, frozenset):
            return sorted(v)
        raise TypeError(f"not serializable: {type(v)}")

    return json.dumps(obj, sort_keys=True, indent=2, default=default)


def _csv_text(rows):
    if not rows:
        return "\n"
    header = list(rows[0].keys())
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(row[h]) if isinstance(row[h], float)
                              else str(row[h]) for h in header))
    return "\n".join(lines) + "\n"


def write_report(results, out_dir, config, force=False):
    """Persist artifacts plus a manifest of content hashes."""
    out = Path(out_dir)
    if out.joinpath("summary.json").exists() and not force:
        raise LacunaError(
            f"{out} already holds a report; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    files = {}

    summary_doc = {
        "experiment": config.experiment,
        "config": {**asdict(config), "out": None},
        "version": __version__,
        "seed": config.seed,
        "summary": results["summary"],
        "fits": {k: _fit_record(f) for k, f in results["fits"].items()},
        "finding": results["finding"],
    }
    files["summary.json"] = _dumps(summary_doc) + "\n"
    for name, rows in results["tables"].items():
        files[f"{name}.csv"] = _csv_text(rows)
    for name, fit in results["fits"].items():
        lines = [f"{x!r}\t{y!r}" for x, y in fit.samples]
        files[f"{name}_fit.dat"] = "\n".join(lines) + "\n"

    manifest = {}
    for fname, text in files.items():
        out.joinpath(fname).write_text(text)
        manifest[fname] = hashlib.sha256(text.encode()).hexdigest()
    out.joinpath("manifest.json").write_text(_dumps(manifest) + "\n")
    return manifest


# -- argument parsing ---------------------------------------------------------

def _kv_pairs(values):
    out = {}
    for item in values or []:
        if "=" not in item:
            raise ParseError(f"--param expects key=value, got {item!r}")
        key, _, val = item.partition("=")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lacuna",
        description="Grid experiments for averaging operators on homogeneous groups")
    sub = parser.add_subparsers(dest="section", required=True)
    for section, names in EXPERIMENTS.items():
        sp = sub.add_parser(section)
        ssub = sp.add_subparsers(dest="command", required=True)
        for name in names:
            cp = ssub.add_parser(name)
            cp.add_argument("--config", default=None)
            cp.add_argument("--algebra", default=None)
            cp.add_argument("--measure", default=None,
                            help="measure kind (koranyi, horizontal, tilted, "
                                 "moment, line, center, bump, pointmass)")
            cp.add_argument("--points", type=int, default=None)
            cp.add_argument("--grid-radius", type=float, default=None)
            cp.add_argument("--resolution", type=int, default=None)
            cp.add_argument("--gaps", default=None)
            cp.add_argument("--param", action="append", default=None)
            cp.add_argument("--seed", type=int, default=None)
            cp.add_argument("--threads", type=int, default=None)
            cp.add_argument("--out", default=None)
            cp.add_argument("--force", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = {"experiment": f"{args.section}.{args.command}"}
        if args.algebra is not None:
            overrides["algebra"] = args.algebra
        measure_over = {}
        if args.measure is not None:
            measure_over["kind"] = args.measure
        if args.points is not None:
            measure_over["n_points"] = args.points
        if measure_over:
            overrides["measure"] = measure_over
        grid_over = {}
        if args.grid_radius is not None:
            grid_over["radius"] = args.grid_radius
        if args.resolution is not None:
            grid_over["resolution"] = args.resolution
        if grid_over:
            overrides["grid"] = grid_over
        params = _kv_pairs(args.param)
        if args.gaps is not None:
            params["gaps"] = args.gaps
        if params:
            overrides["params"] = params
        for key in ("seed", "threads", "out"):
            val = getattr(args, key)
            if val is not None:
                overrides[key] = val
        config = parse_config(args.config, overrides)
    except LacunaError as e:
        print(_dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 1
    try:
        code, _ = run_experiment(config, force=args.force)
    except LacunaError as e:
        print(_dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 1
    return code


if __name__ == "__main__":
    sys.exit(main())
