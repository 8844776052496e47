"""Built-in test algebras."""

from fractions import Fraction
from pathlib import Path

from .algebra import graded_algebra, load_algebra
from .errors import ParseError


def abelian(n, exponents=None, layers=None):
    if exponents is None:
        exponents = [1] * n
    if layers is None:
        layers = [1] * n
    return graded_algebra(n, exponents, layers, [])


def heisenberg(m):
    """H^m: [X_j, X_{m+j}] = X_{2m+1}, exponents (1,...,1,2)."""
    n = 2 * m + 1
    brackets = [(j + 1, m + j + 1, n, Fraction(1)) for j in range(m)]
    return graded_algebra(n, [1] * (2 * m) + [2], [1] * (2 * m) + [2], brackets)


def free_step2(d):
    """Free nilpotent algebra of step 2 on d generators."""
    n = d + d * (d - 1) // 2
    brackets = []
    k = d
    for i in range(d):
        for j in range(i + 1, d):
            k += 1
            brackets.append((i + 1, j + 1, k, Fraction(1)))
    return graded_algebra(
        n, [1] * d + [2] * (n - d), [1] * d + [2] * (n - d), brackets
    )


def engel():
    """4-dimensional step-3 stratified algebra: [X1,X2]=X3, [X1,X3]=X4."""
    return graded_algebra(
        4, [1, 1, 2, 3], [1, 1, 2, 3], [(1, 2, 3, 1), (1, 3, 4, 1)]
    )


def filiform(step):
    """Filiform algebra of the given step: [X1, X_j] = X_{j+1}, j >= 2."""
    n = step + 1
    brackets = [(1, j, j + 1, 1) for j in range(2, n)]
    exponents = [1, 1] + list(range(2, step + 1))
    return graded_algebra(n, exponents, exponents, brackets)


REGISTRY = {
    "abelian1": lambda: abelian(1),
    "abelian2": lambda: abelian(2),
    "abelian3": lambda: abelian(3),
    "heisenberg1": lambda: heisenberg(1),
    "heisenberg2": lambda: heisenberg(2),
    "free2_3": lambda: free_step2(3),
    "engel": engel,
    "filiform4": lambda: filiform(4),
}


def get_algebra(name_or_path):
    """Resolve a registry name or a JSON spec path to an algebra."""
    if name_or_path in REGISTRY:
        return REGISTRY[name_or_path]()
    if not Path(name_or_path).exists():
        raise ParseError(
            f"unknown algebra {name_or_path!r}; registry names are "
            f"{sorted(REGISTRY)} and anything else must be a JSON spec path")
    return load_algebra(name_or_path)
