"""Graded nilpotent Lie algebras with exact rational structure constants.

Vectors are either numpy float arrays (fast mode) or sequences of
``Fraction``/``int`` (exact mode); every operation preserves the mode of
its inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import numpy as np

from .errors import (
    AntisymmetryViolation,
    DimensionMismatch,
    GradingViolation,
    JacobiViolation,
    NotStratified,
)

_RANK_RTOL = 1e-10  # singular values below this (relative) count as zero


def _is_exact(vec):
    return not (isinstance(vec, np.ndarray) and vec.dtype.kind == "f")


@dataclass(frozen=True)
class GradedLieAlgebra:
    """Finite-dimensional graded nilpotent Lie algebra in a fixed basis.

    ``table`` maps (i, j) with i < j to {k: c} so that
    [X_i, X_j] = sum_k c * X_k, all entries exact rationals.
    ``layers`` assigns an integer weight to each basis index and
    ``exponents`` the dilation eigenvalue of each basis vector.
    """

    dim: int
    exponents: tuple
    layers: tuple
    table: dict
    Q: Fraction = field(init=False)
    step: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "Q", sum(self.exponents, Fraction(0)))
        object.__setattr__(self, "step", max(self.layers))
        dense = np.zeros((self.dim, self.dim, self.dim))
        for (i, j), row in self.table.items():
            for k, c in row.items():
                dense[i, j, k] = float(c)
                dense[j, i, k] = -float(c)
        object.__setattr__(self, "_dense", dense)
        object.__setattr__(self, "_bch_terms", _dynkin_words(self.step))
        object.__setattr__(
            self, "_exponents_f", np.array([float(e) for e in self.exponents])
        )

    @property
    def structure_dense(self):
        """Dense float array C with [X,Y]_k = sum_ij C[i,j,k] X_i Y_j."""
        return self._dense

    @property
    def exponents_float(self):
        return self._exponents_f

    @property
    def is_abelian(self):
        return not self.table

    def layer_indices(self, weight):
        return tuple(i for i, w in enumerate(self.layers) if w == weight)

    def check_dim(self, vec):
        n = len(vec) if _is_exact(vec) else vec.shape[-1]
        if n != self.dim:
            raise DimensionMismatch(
                f"vector of length {n} in algebra of dimension {self.dim}"
            )


def graded_algebra(dim, exponents, layers, brackets):
    """Build and validate a graded Lie algebra.

    ``brackets`` is an iterable of (i, j, k, c) with 1-based indices.
    Raises AntisymmetryViolation / GradingViolation / JacobiViolation with
    the offending index tuple.
    """
    exponents = tuple(Fraction(e) for e in exponents)
    layers = tuple(int(w) for w in layers)
    if len(exponents) != dim or len(layers) != dim:
        raise DimensionMismatch("exponents/layers length must equal dim")
    if any(e <= 0 for e in exponents):
        raise GradingViolation("dilation exponents must be positive")
    if list(exponents) != sorted(exponents):
        raise GradingViolation("exponents must be nondecreasing")

    table = {}
    seen = {}
    for (i, j, k, c) in brackets:
        i, j, k = int(i) - 1, int(j) - 1, int(k) - 1
        c = Fraction(c)
        if not all(0 <= t < dim for t in (i, j, k)):
            raise DimensionMismatch(f"bracket index out of range: {(i+1, j+1, k+1)}")
        if i == j:
            if c != 0:
                raise AntisymmetryViolation(f"[X_{i+1}, X_{i+1}] must vanish")
            continue
        key, sgn = ((i, j), 1) if i < j else ((j, i), -1)
        prev = seen.get((key, k))
        val = sgn * c
        if prev is not None and prev != val:
            raise AntisymmetryViolation(
                f"inconsistent entries for ({i+1}, {j+1}, {k+1})"
            )
        seen[(key, k)] = val
        if val != 0:
            table.setdefault(key, {})[k] = val

    for (i, j), row in table.items():
        for k, c in row.items():
            if layers[k] != layers[i] + layers[j]:
                raise GradingViolation(
                    f"weight mismatch at ({i+1}, {j+1}, {k+1}): "
                    f"{layers[i]} + {layers[j]} != {layers[k]}"
                )
            if exponents[k] != exponents[i] + exponents[j]:
                raise GradingViolation(
                    f"dilation exponents not additive at ({i+1}, {j+1}, {k+1})"
                )

    alg = GradedLieAlgebra(dim=dim, exponents=exponents, layers=layers, table=table)
    _check_jacobi(alg)
    return alg


def _basis_bracket(alg, i, j):
    if i == j:
        return {}
    if i < j:
        return alg.table.get((i, j), {})
    return {k: -c for k, c in alg.table.get((j, i), {}).items()}


def _check_jacobi(alg):
    n = alg.dim
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                acc = {}
                for (a, b, c) in ((i, j, k), (j, k, i), (k, i, j)):
                    inner = _basis_bracket(alg, b, c)
                    for m, cm in inner.items():
                        for p, cp in _basis_bracket(alg, a, m).items():
                            acc[p] = acc.get(p, Fraction(0)) + cm * cp
                if any(v != 0 for v in acc.values()):
                    raise JacobiViolation(f"Jacobi fails on triple ({i+1}, {j+1}, {k+1})")


def load_algebra(source):
    """Load an algebra from a JSON document (path, JSON text, or dict).

    Expected keys: ``dim``, ``exponents`` (rationals, "p/q" strings allowed),
    ``layers`` (weight per basis index), ``brackets`` ([i, j, k, c] rows,
    1-based indices).
    """
    if isinstance(source, dict):
        doc = source
    else:
        text = str(source)
        if text.lstrip().startswith("{"):
            doc = json.loads(text)
        else:
            with open(text) as fh:
                doc = json.load(fh)
    missing = {"dim", "exponents", "layers"} - set(doc)
    if missing:
        raise DimensionMismatch(f"algebra spec missing keys: {sorted(missing)}")
    return graded_algebra(
        dim=int(doc["dim"]),
        exponents=[Fraction(str(e)) for e in doc["exponents"]],
        layers=doc["layers"],
        brackets=[(i, j, k, Fraction(str(c))) for (i, j, k, c) in doc.get("brackets", [])],
    )


def dump_algebra(alg):
    """Inverse of load_algebra: JSON-serializable dict."""
    return {
        "dim": alg.dim,
        "exponents": [str(e) for e in alg.exponents],
        "layers": list(alg.layers),
        "brackets": [
            [i + 1, j + 1, k + 1, str(c)]
            for (i, j), row in sorted(alg.table.items())
            for k, c in sorted(row.items())
        ],
    }


# -- bracket and BCH ----------------------------------------------------------

def bracket(alg, X, Y):
    """Lie bracket [X, Y] by bilinear expansion of the structure constants."""
    alg.check_dim(X)
    alg.check_dim(Y)
    if _is_exact(X) and _is_exact(Y):
        out = [Fraction(0)] * alg.dim
        for (i, j), row in alg.table.items():
            coef = X[i] * Y[j] - X[j] * Y[i]
            if coef:
                for k, c in row.items():
                    out[k] += coef * c
        return out
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return np.einsum("...i,...j,ijk->...k", X, Y, alg._dense)


def _dynkin_words(step):
    """Aggregated Dynkin-series coefficients up to bracket length ``step``.

    Returns a list of (coef: float-free Fraction, word) pairs where ``word``
    is a tuple over {0, 1} (0 = first argument, 1 = second) and the word is
    evaluated as the right-nested bracket of its letters.
    """
    agg = {}

    def extend(blocks, total):
        n = len(blocks)
        if n >= 1:
            word = tuple(
                letter for (p, q) in blocks for letter in (0,) * p + (1,) * q
            )
            denom = total
            for (p, q) in blocks:
                denom *= math.factorial(p) * math.factorial(q)
            coef = Fraction((-1) ** (n - 1), n) * Fraction(1, denom)
            agg[word] = agg.get(word, Fraction(0)) + coef
        if total >= step:
            return
        for p in range(0, step - total + 1):
            for q in range(0, step - total - p + 1):
                if p + q == 0:
                    continue
                extend(blocks + [(p, q)], total + p + q)

    extend([], 0)
    return [(c, w) for w, c in sorted(agg.items()) if c != 0]


def _eval_words(alg, terms, X, Y, zero, add, scale):
    """Shared word-evaluation loop with suffix memoisation."""
    letters = (X, Y)
    cache = {}

    def nested(word):
        if word in cache:
            return cache[word]
        if len(word) == 1:
            val = letters[word[0]]
        else:
            val = bracket(alg, letters[word[0]], nested(word[1:]))
        cache[word] = val
        return val

    acc = zero()
    for coef, word in terms:
        acc = add(acc, scale(coef, nested(word)))
    return acc


def bch(alg, X, Y):
    """log(exp X . exp Y) via the Dynkin series, exact at the nilpotency step.

    Accepts broadcasting numpy arrays (float mode) or Fraction sequences
    (exact mode).
    """
    alg.check_dim(X)
    alg.check_dim(Y)
    terms = alg._bch_terms
    if _is_exact(X) and _is_exact(Y):
        X = [Fraction(v) for v in X]
        Y = [Fraction(v) for v in Y]
        return _eval_words(
            alg, terms, X, Y,
            zero=lambda: [Fraction(0)] * alg.dim,
            add=lambda a, b: [u + v for u, v in zip(a, b)],
            scale=lambda c, v: [c * u for u in v],
        )
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    shape = np.broadcast_shapes(X.shape, Y.shape)
    return _eval_words(
        alg, terms, X, Y,
        zero=lambda: np.zeros(shape),
        add=lambda a, b: a + b,
        scale=lambda c, v: float(c) * np.broadcast_to(v, shape),
    )


def nested_bracket(alg, vectors):
    """Right-nested bracket [X_1, [X_2, ... [X_{l-1}, X_l] ... ]]."""
    vectors = list(vectors)
    if not vectors:
        raise DimensionMismatch("nested_bracket needs at least one vector")
    out = vectors[-1]
    alg.check_dim(out)
    for v in reversed(vectors[:-1]):
        out = bracket(alg, v, out)
    return out


# -- rank machinery -----------------------------------------------------------

def _exact_rank(rows):
    """Rank of a matrix of Fractions by Gaussian elimination."""
    rows = [list(map(Fraction, r)) for r in rows]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    col = 0
    while rank < len(rows) and col < ncols:
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            col += 1
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        pr = rows[rank]
        for r in range(rank + 1, len(rows)):
            if rows[r][col] != 0:
                f = rows[r][col] / pr[col]
                rows[r] = [a - f * b for a, b in zip(rows[r], pr)]
        rank += 1
        col += 1
    return rank


def matrix_rank(mat, exact=False):
    if exact:
        return _exact_rank(mat)
    mat = np.asarray(mat, dtype=float)
    if mat.size == 0 or not np.any(mat):
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(s > _RANK_RTOL * s[0]))


def ad_matrix(alg, X):
    """Matrix of Y -> [X, Y] in the fixed basis (float)."""
    alg.check_dim(X)
    Xf = np.asarray([float(v) for v in X]) if _is_exact(X) else np.asarray(X, float)
    return np.einsum("i,ijk->kj", Xf, alg._dense)


def ad_kernel_dim(alg, X):
    """Dimension of ker(ad_X) = n - rank of the ad matrix."""
    alg.check_dim(X)
    if _is_exact(X):
        rows = [[Fraction(0)] * alg.dim for _ in range(alg.dim)]
        for (i, j), row in alg.table.items():
            for k, c in row.items():
                rows[k][j] += X[i] * c
                rows[k][i] -= X[j] * c
        return alg.dim - _exact_rank(rows)
    return alg.dim - matrix_rank(ad_matrix(alg, X))


def check_stratified(alg):
    """Test [V_1, V_j] = V_{j+1} for every layer; returns (bool, certificate)."""
    v1 = alg.layer_indices(1)
    if not v1:
        return False, {"stratified": False, "deficient_layer": 1, "reason": "empty V_1"}
    for j in range(1, alg.step):
        vj = alg.layer_indices(j)
        target = alg.layer_indices(j + 1)
        if not target:
            continue
        rows = []
        for e in v1:
            for f in vj:
                br = _basis_bracket(alg, e, f)
                rows.append([float(br.get(k, 0)) for k in target])
        rank = matrix_rank(rows) if rows else 0
        if rank < len(target):
            return False, {
                "stratified": False,
                "deficient_layer": j + 1,
                "rank": rank,
                "required": len(target),
            }
    return True, {"stratified": True, "step": alg.step}


def generator_test(alg, sample):
    """Decide whether a group sample generates, via the first-layer projection.

    Projects the log of each sample point onto V_1, adjoins the negatives
    (inverses project to negated coordinates) and tests whether the linear
    span equals V_1.  This is a span surrogate for additive generation: a
    finite cloud cannot certify density, so the decision is a rank test on
    the symmetrised projections.
    """
    ok, cert = check_stratified(alg)
    if not ok:
        raise NotStratified(f"generator_test requires a stratified algebra: {cert}")
    pts = np.atleast_2d(np.asarray(sample, dtype=float))
    if pts.shape[1] != alg.dim:
        raise DimensionMismatch("sample dimension mismatch")
    v1 = list(alg.layer_indices(1))
    proj = pts[:, v1]
    sym = np.vstack([proj, -proj])
    rank = matrix_rank(sym)
    return rank == len(v1), {
        "generates": rank == len(v1),
        "rank": rank,
        "required": len(v1),
        "v1_indices": [i + 1 for i in v1],
        "decision": "linear-span rank test on symmetrized projections",
    }
