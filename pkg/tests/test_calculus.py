import numpy as np
import pytest

from superforms.calculus import (
    FormField,
    Grid,
    MetricField,
    WeightField,
    adjoint_d,
    adjoint_d_sharp_twisted,
    bkn_terms,
    box,
    curvature_lower_bound,
    curvature_op,
    d,
    d_sharp,
    d_sharp_twisted,
    drop_top,
    j_field,
    lift_top,
    weighted_inner,
    weighted_norm_sq,
)
from superforms.sampling import make_rng, random_field
from superforms.weights import add, parse_weight, power, quadratic


def interior(m, k=2):
    return slice(k, m - k)


def test_d_of_affine_is_exact_in_the_interior():
    g = Grid.cube(1, -1.0, 1.0, 64)
    x = g.points()[..., 0]
    dF = d(FormField(g, 0, 0, (3 * x + 1)[None]))
    assert dF.p == 1 and dF.q == 0
    assert np.allclose(dF.values[0, :-1], 3.0, atol=1e-12)


@pytest.mark.parametrize("boundary", ["zero", "periodic", "free"])
def test_d_squared_vanishes(boundary):
    rng = make_rng(0)
    g = Grid.cube(3, -1.0, 1.0, 8, boundary)
    for p, q in ((0, 0), (1, 2), (0, 3)):
        shape = (len(FormField.zeros(g, p, q).keys),) + g.shape
        # integer data with h = 1/4: every operation is exact, so d d F is exactly 0
        F = FormField(g, p, q, rng.integers(-8, 8, shape).astype(float))
        assert d(d(F)).max_abs() == 0.0
        assert d_sharp(d_sharp(F)).max_abs() == 0.0
        F = FormField(g, p, q, rng.standard_normal(shape))
        assert d(d(F)).max_abs() <= 1e-13 * F.max_abs() / g.h[0] ** 2


def test_d_sharp_and_twisted_example():
    g = Grid.cube(1, -3.0, 3.0, 128)
    x = g.points()[..., 0]
    f = np.sin(x)
    F = FormField(g, 0, 0, f[None])
    h = g.h[0]
    fwd = (np.roll(f, -1) - f) / h
    ds = d_sharp(F)
    assert (ds.p, ds.q) == (0, 1)
    assert np.allclose(ds.values[0, :-1], fwd[:-1], atol=1e-12)
    tw = d_sharp_twisted(F, quadratic(g))
    assert np.allclose(tw.values[0, :-1], fwd[:-1] - x[:-1] * f[:-1], atol=1e-12)


def test_j_field_matches_d_sharp():
    rng = make_rng(1)
    g = Grid.cube(2, -1.0, 1.0, 8)
    F = random_field(rng, g, 1, 0, radius=0.9)
    assert np.allclose(j_field(d(j_field(F))).values, d_sharp(F).values, atol=1e-13)


def test_inner_unit_box_volume():
    g = Grid.cube(2, 0.0, 1.0, 16)
    one = FormField(g, 0, 0, np.ones((1,) + g.shape))
    assert weighted_norm_sq(one, None, MetricField.identity(g)) == pytest.approx(1.0, abs=1e-14)


def test_inner_gaussian_integral():
    g = Grid.cube(1, -8.0, 8.0, 4096)
    one = FormField(g, 0, 0, np.ones((1,) + g.shape))
    val = weighted_norm_sq(one, quadratic(g), MetricField.identity(g))
    assert val == pytest.approx(np.sqrt(2 * np.pi), abs=1e-6)


def test_inner_metric_per_point_oracle():
    g = Grid.cube(1, 0.0, 1.0, 10)
    G = MetricField(g, np.full(g.shape + (1, 1), 4.0))
    a = FormField(g, 1, 0, np.ones((1,) + g.shape))
    # (dx, dx) = 1/4, volume density det G = 4, so the integral is the box volume
    assert weighted_norm_sq(a, None, G) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("p,q", [(1, 0), (1, 1), (2, 1), (2, 2)])
def test_adjoint_identity_exact_mode(p, q):
    rng = make_rng(p + 3 * q)
    g = Grid.cube(2, -2.0, 2.0, 32)
    w = parse_weight("quadratic+quartic", g)
    G = MetricField.hessian(w)
    A = random_field(rng, g, p - 1, q, radius=1.5)
    B = random_field(rng, g, p, q, center=(0.2, -0.1), radius=1.5)
    lhs = weighted_inner(d(A), B, w, G)
    rhs = weighted_inner(A, adjoint_d(B, w, G), w, G)
    scale = np.sqrt(weighted_norm_sq(d(A), w, G) * weighted_norm_sq(B, w, G))
    assert abs(lhs - rhs) <= 1e-12 * scale
    if q >= 1:
        A2 = random_field(rng, g, p, q - 1, radius=1.5)
        lhs = weighted_inner(d_sharp_twisted(A2, w), B, w, G)
        rhs = weighted_inner(A2, adjoint_d_sharp_twisted(B, w, G), w, G)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, scale)


def test_d_star_example_commutator_mode():
    g = Grid.cube(1, -5.0, 5.0, 2048)
    x = g.points()[..., 0]
    gx = np.exp(-x ** 2)
    B = FormField(g, 1, 0, gx[None])
    out = adjoint_d(B, quadratic(g), MetricField.identity(g), mode="commutator").values[0]
    exact = -(-2 * x * gx) + x * gx
    assert np.max(np.abs(out - exact)[interior(g.m[0], 4)]) < 20 * g.h[0]


def test_adjoint_modes_agree_at_first_order():
    errs = []
    for m in (128, 256, 512):
        g = Grid.cube(1, -5.0, 5.0, m)
        x = g.points()[..., 0]
        B = FormField(g, 1, 0, np.exp(-x ** 2)[None])
        w, G = quadratic(g), MetricField.identity(g)
        a = adjoint_d(B, w, G).values
        b = adjoint_d(B, w, G, mode="commutator").values
        errs.append(np.linalg.norm(a - b) / np.linalg.norm(a) * np.sqrt(1.0))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates >= 0.9)


def test_curvature_on_functions_is_minus_identity():
    g = Grid.cube(1, -2.0, 2.0, 32)
    rng = make_rng(2)
    F = FormField(g, 0, 0, rng.standard_normal((1,) + g.shape))
    C = curvature_op(F, quadratic(g), MetricField.identity(g))
    assert np.allclose(C.values, -F.values, atol=1e-15)


def test_bkn_of_zero_field():
    g = Grid.cube(2, -1.0, 1.0, 8)
    t = bkn_terms(FormField.zeros(g, 1, 1), quadratic(g), MetricField.identity(g))
    assert t.lhs == 0.0 and t.rhs == 0.0 and t.residual == 0.0


def test_curvature_lower_bound_examples():
    g = Grid.cube(2, -1.0, 1.0, 16)
    q = quadratic(g)
    for p in (1, 2):
        assert curvature_lower_bound(q, MetricField.identity(g), p) == pytest.approx(p)
    w = parse_weight("quadratic+quartic", g)
    assert curvature_lower_bound(w, MetricField.hessian(w), 2) == pytest.approx(2.0)
    g1 = Grid.cube(1, -1.0, 1.0, 64)
    w1 = add(power(g1, 4.0, 1 / 12), quadratic(g1))
    eps = curvature_lower_bound(w1, MetricField.identity(g1), 1)
    assert 1.0 <= eps <= 1.0 + g1.h[0] ** 2


def test_curvature_bound_monotone_in_scaling():
    g = Grid.cube(2, -2.0, 2.0, 16)
    w = parse_weight("quadratic+quartic", g)
    G = MetricField.identity(g)
    assert curvature_lower_bound(w.scaled(2.0), G, 1) >= curvature_lower_bound(w, G, 1)


def test_box_relation_on_functions():
    g = Grid.cube(1, -6.0, 6.0, 512)
    x = g.points()[..., 0]
    F = FormField(g, 0, 0, np.exp(-x ** 2)[None])
    w, G = quadratic(g), MetricField.identity(g)
    diff = box(F, w, G, "d").values - (box(F, w, G, "dsharp").values - F.values)
    assert np.max(np.abs(diff)) < 0.1


def test_lift_and_drop_round_trip():
    rng = make_rng(3)
    g = Grid.cube(2, -1.0, 1.0, 8)
    F = random_field(rng, g, 1, 0, radius=0.9)
    L = lift_top(F)
    assert (L.p, L.q) == (1, 2)
    assert np.array_equal(drop_top(L).values, F.values)


def test_field_validation():
    g = Grid.cube(2, -1.0, 1.0, 8)
    with pytest.raises(ValueError):
        FormField(g, 1, 0, np.zeros((3,) + g.shape))
    with pytest.raises(ValueError):
        Grid.cube(2, 1.0, -1.0, 8)
    with pytest.raises(ValueError):
        Grid.cube(2, -1.0, 1.0, 8, "mirror")
    with pytest.raises(ValueError):
        FormField.zeros(g, 1, 0) + FormField.zeros(g, 0, 1)
    with pytest.raises(ValueError):
        MetricField(g, -np.ones(g.shape + (2, 2)) * np.eye(2))
    with pytest.raises(ValueError):
        WeightField(g, np.zeros(g.shape), np.zeros((2,) + g.shape), np.zeros(g.shape + (3, 3)))
