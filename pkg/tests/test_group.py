"""Group operations: dilations, norms, decompositions, right derivatives."""

import numpy as np
import pytest

from lacuna.algebras import abelian, engel, heisenberg
from lacuna.errors import NonpositiveScale, OutOfDomain
from lacuna.gridfn import Grid, from_callable
from lacuna.group import (
    commutator,
    dilate,
    hom_norm,
    identity,
    inverse,
    multiply,
    quasi_triangle_const,
    right_derivative,
    right_derivative_grid,
    upsilon_compose,
    upsilon_decompose,
)


def test_identity_and_inverse():
    h1 = heisenberg(1)
    x = np.array([0.4, -1.2, 0.3])
    e = identity(h1)
    assert np.allclose(multiply(h1, x, e), x)
    assert np.allclose(multiply(h1, inverse(x), x), 0.0)


def test_dilation_is_automorphism():
    # delta_t(x . y) = delta_t x . delta_t y to rounding
    rng = np.random.default_rng(0)
    for alg in (heisenberg(1), heisenberg(2), engel()):
        x = rng.normal(size=(50, alg.dim))
        y = rng.normal(size=(50, alg.dim))
        for t in (0.5, 2.0, 7.3):
            lhs = dilate(alg, t, multiply(alg, x, y))
            rhs = multiply(alg, dilate(alg, t, x), dilate(alg, t, y))
            assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1, np.max(np.abs(lhs)))


def test_dilate_rejects_nonpositive_scale():
    with pytest.raises(NonpositiveScale):
        dilate(heisenberg(1), 0.0, np.zeros(3))


def test_hom_norm_homogeneous_and_symmetric():
    h1 = heisenberg(1)
    x = np.array([0.3, -0.7, 1.9])
    n = hom_norm(h1, x)
    assert np.isclose(hom_norm(h1, dilate(h1, 4.0, x)), 4.0 * n)
    assert np.isclose(hom_norm(h1, inverse(x)), n)
    assert hom_norm(h1, np.zeros(3)) == 0.0
    assert np.isclose(hom_norm(h1, np.array([0.5, 0.25, -2.0])),
                      np.sqrt(2.0))


def test_haar_scaling():
    # quadrature of f o delta_(1/t) = t^Q quadrature of f for smooth f
    h1 = heisenberg(1)
    grid = Grid.cube(2.5, 128, 3)
    f = from_callable(grid, lambda x: np.exp(-4 * (x ** 2).sum(axis=-1)))
    base = f.values.sum() * grid.cell_volume
    t = 1.5
    f_t = from_callable(grid, lambda x: np.exp(-4 * (dilate(h1, 1 / t, x) ** 2).sum(axis=-1)))
    scaled = f_t.values.sum() * grid.cell_volume
    assert abs(scaled - t ** float(h1.Q) * base) <= 0.01 * scaled


def test_quasi_triangle_const():
    a2 = abelian(2)
    assert abs(quasi_triangle_const(a2, 20_000, seed=0) - 1.0) < 1e-9
    h1 = heisenberg(1)
    c = quasi_triangle_const(h1, 20_000, seed=0)
    assert 1.0 <= c <= 2.0


def test_upsilon_roundtrip():
    for alg in (heisenberg(1), engel()):
        rng = np.random.default_rng(7)
        z = rng.normal(size=alg.dim)
        t = upsilon_decompose(alg, z)
        assert np.allclose(upsilon_compose(alg, t), z, atol=1e-9)


def test_right_derivative_heisenberg_sign():
    # g(x) = u: the right-invariant X1 derivative is d/dt g(exp(t X1) . x)
    # = x2 / 2 in the convention [X1, X2] = X3
    h1 = heisenberg(1)
    grid = Grid.cube(2.0, 33, 3)
    g = from_callable(grid, lambda x: x[..., 2])
    x = np.array([0.3, 0.8, 0.1])
    d = right_derivative(h1, g, 0, x)
    assert abs(d - 0.4) < 1e-6


def test_right_derivative_grid_matches_pointwise():
    h1 = heisenberg(1)
    grid = Grid.cube(2.0, 33, 3)
    g = from_callable(grid, lambda x: np.exp(-(x ** 2).sum(axis=-1)))
    dg = right_derivative_grid(h1, g, 1)
    x = np.array([0.25, -0.5, 0.25])
    idx = tuple(int(round(v)) for v in grid.fractional(x[None])[0])
    assert abs(dg.values[idx] - right_derivative(h1, g, 1, x)) < 1e-8


def test_right_derivative_out_of_domain():
    h1 = heisenberg(1)
    grid = Grid.cube(1.0, 17, 3)
    g = from_callable(grid, lambda x: x[..., 0])
    with pytest.raises(OutOfDomain):
        right_derivative(h1, g, 0, np.array([5.0, 0.0, 0.0]))


def test_commutator_matches_group_word():
    h1 = heisenberg(1)
    x = np.array([0.2, 0.0, 0.0])
    y = np.array([0.0, 0.3, 0.0])
    c = commutator(h1, x, y)
    word = multiply(h1, multiply(h1, x, y),
                    multiply(h1, inverse(x), inverse(y)))
    assert np.allclose(c, word, atol=1e-12)
    assert np.isclose(c[2], 0.06)
