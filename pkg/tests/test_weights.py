import numpy as np
import pytest

from superforms.calculus import Grid
from superforms.sampling import bump, make_rng, random_closed_field, random_coefficients, random_field
from superforms.calculus import d
from superforms.weights import custom, parse_weight, power, power_conjugate, quadratic


def test_quadratic_derivatives():
    g = Grid.cube(2, -1.0, 1.0, 8)
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    w = quadratic(g, A)
    x = g.points()
    assert np.allclose(w.phi, 0.5 * np.einsum("...i,ij,...j->...", x, A, x))
    assert np.allclose(np.moveaxis(w.grad, 0, -1), x @ A)
    assert np.allclose(w.hess, A)
    assert w.convex
    assert not quadratic(g, -1.0).convex


@pytest.mark.parametrize("r", [1.5, 2.0, 3.0, 4.0])
def test_power_derivatives_by_finite_differences(r):
    g = Grid.cube(2, 0.3, 1.3, 16)
    w = power(g, r, 0.7)
    c = custom(g, w.phi)
    inner = (slice(2, -2), slice(2, -2))
    assert np.allclose(c.grad[(slice(None),) + inner], w.grad[(slice(None),) + inner], rtol=2e-2, atol=1e-3)
    assert np.allclose(c.hess[inner], w.hess[inner], rtol=5e-2, atol=5e-2)


def test_power_euler_identity():
    g = Grid.cube(2, -2.0, 2.0, 12)
    w = power(g, 4.0, 1.0)
    x = np.moveaxis(g.points(), -1, 0)
    assert np.allclose(np.sum(x * w.grad, axis=0), 4.0 * w.phi, atol=1e-12)


def test_power_conjugate_constants():
    s, cs = power_conjugate(4.0, 0.25)
    assert s == pytest.approx(4 / 3) and cs == pytest.approx(0.75)
    assert power_conjugate(2.0, 0.5) == pytest.approx((2.0, 0.5))


def test_parse_weight_catalog(tmp_path):
    g = Grid.cube(1, -1.0, 1.0, 16)
    x = g.points()[..., 0]
    assert np.allclose(parse_weight("quadratic", g).phi, x ** 2 / 2)
    assert np.allclose(parse_weight("quadratic(3)", g).phi, 1.5 * x ** 2)
    assert np.allclose(parse_weight("quartic", g).phi, x ** 4 / 4)
    assert np.allclose(parse_weight("power(3, 2)", g).phi, 2 * np.abs(x) ** 3)
    assert np.allclose(parse_weight("concave", g).phi, -x ** 2 / 2)
    assert np.allclose(parse_weight("quadratic+power(4,1)", g).phi, x ** 2 / 2 + x ** 4)
    assert not parse_weight("zero", g).phi.any()
    f = tmp_path / "w.txt"
    np.savetxt(f, x ** 2)
    assert np.allclose(parse_weight(f"custom({f})", g).phi, x ** 2)
    for bad in ("cubic", "power", "quadratic(", "custom()"):
        with pytest.raises(ValueError):
            parse_weight(bad, g)


def test_power_rejects_small_r():
    with pytest.raises(ValueError):
        power(Grid.cube(1, -1.0, 1.0, 8), 1.0)


def test_bump_profile():
    g = Grid.cube(1, -2.0, 2.0, 64)
    b = bump(g, 0.5, 1.0)
    x = g.points()[..., 0]
    assert np.all(b[np.abs(x - 0.5) >= 1.0] == 0.0)
    assert np.allclose(b, np.clip(1 - (x - 0.5) ** 2, 0, None) ** 4)


def test_sampling_is_seeded():
    g = Grid.cube(2, -1.0, 1.0, 8)
    a = random_field(make_rng(7), g, 1, 1)
    b = random_field(make_rng(7), g, 1, 1)
    assert np.array_equal(a.values, b.values)
    vec = make_rng(7).uniform(-1.0, 1.0, 4)
    assert np.allclose(a.values, vec[:, None, None] * bump(g)[None])
    assert random_coefficients(make_rng(1), 3, 1, 2, 5).shape == (5, 9)


def test_random_closed_field_is_closed():
    g = Grid.cube(3, -1.0, 1.0, 8)
    F = random_closed_field(make_rng(0), g, 2, 1)
    assert d(F).max_abs() <= 1e-12 * F.max_abs() / g.h[0]
    with pytest.raises(ValueError):
        random_closed_field(make_rng(0), g, 0, 1)
