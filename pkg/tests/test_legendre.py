import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from superforms.calculus import FormField, Grid, MetricField, d, j_field, pointwise_inner
from superforms.legendre import (
    ConvexField,
    GradientMap,
    compose,
    conjugate_weight,
    dual_grid_for,
    homogeneous_check,
    legendre_transform,
    pullback,
    solve_homogeneous,
)
from superforms.sampling import bump, make_rng
from superforms.solver import SolveConfig, SolverError, solve_d
from superforms.weights import parse_weight, power, quadratic


def affine_field(grid, p, q, rng):
    """Coefficients affine in x, which multilinear interpolation reproduces exactly."""
    from superforms.exterior import basis
    K = len(basis(grid.n, p, q))
    c0 = rng.uniform(-1, 1, K)
    c1 = rng.uniform(-1, 1, (K, grid.n))
    x = grid.points()
    vals = c0[:, None] + np.einsum("ki,...i->k...", c1, x).reshape(K, -1)
    return FormField(grid, p, q, vals.reshape((K,) + grid.shape)), (c0, c1)


def test_self_dual_quadratic():
    g = Grid.cube(2, -2.0, 2.0, 32)
    w = quadratic(g)
    fs = legendre_transform(ConvexField.from_weight(w), g)
    assert np.max(np.abs(fs.values - w.phi)) <= 1e-12
    assert fs.homogeneity == 2.0


def test_quartic_conjugate_against_golden_section():
    g = Grid.cube(1, -2.0, 2.0, 512)
    f = ConvexField.from_weight(power(g, 4.0, 0.25))
    ys = np.array([-1.0, -0.5, 0.5, 1.0])
    fs = legendre_transform(f, Grid((-1.25,), (1.25,), (5,)))
    y = fs.grid.points()[..., 0]
    exact = 0.75 * np.abs(y) ** (4 / 3)
    assert np.max(np.abs(fs.values - exact)) <= 2e-2
    for yy in ys:
        sup = -minimize_scalar(lambda x: -(x * yy - x ** 4 / 4), bounds=(-2, 2), method="bounded",
                               options={"xatol": 1e-12}).fun
        assert sup == pytest.approx(0.75 * abs(yy) ** (4 / 3), abs=1e-9)


def test_constant_shift():
    g = Grid.cube(1, -2.0, 2.0, 64)
    f = ConvexField.from_weight(power(g, 4.0, 0.25))
    shifted = ConvexField(g, f.values + 3.0, f.grad)
    dual = Grid.cube(1, -1.0, 1.0, 16)
    assert np.allclose(legendre_transform(shifted, dual).values,
                       legendre_transform(f, dual).values - 3.0, atol=1e-13)


def test_boundary_flag_on_small_domain():
    g = Grid.cube(1, -1.0, 1.0, 32)
    fs = legendre_transform(ConvexField.from_weight(quadratic(g)), Grid.cube(1, -3.0, 3.0, 16))
    assert fs.flagged
    with pytest.raises(SolverError):
        conjugate_weight(parse_weight("quadratic+quartic", g), Grid.cube(1, -30.0, 30.0, 16))


def test_biconjugate_and_gradient_inversion():
    g = Grid.cube(1, -2.0, 2.0, 401)
    w = parse_weight("quadratic+quartic", g)
    f = ConvexField.from_weight(w)
    dual = Grid.cube(1, -3.0, 3.0, 401)
    fs = legendre_transform(f, dual)
    fss = legendre_transform(fs, g)
    core = np.abs(g.points()[..., 0]) <= 1.0
    h = g.h[0]
    assert np.max(np.abs(fss.values - f.values)[core]) <= 2 * h
    # grad phi* at grad phi(x) is x
    star = conjugate_weight(w, dual)
    back = np.interp(w.grad[0], dual.axes()[0], star.grad[0])
    assert np.max(np.abs(back - g.axes()[0])[core]) <= 10 * h


def test_conjugate_of_homogeneous_is_homogeneous():
    g = Grid.cube(1, -2.0, 2.0, 2048)
    f = ConvexField.from_weight(power(g, 3.0, 1.0))
    fs = legendre_transform(f, Grid.cube(1, -4.0, 4.0, 64))
    assert fs.homogeneity == pytest.approx(1.5)
    assert fs.euler_residual() <= 1e-2
    assert ConvexField.from_weight(conjugate_weight(power(g, 3.0), g)).euler_residual() <= 1e-12


def test_euler_exact_for_quartic():
    g = Grid.cube(1, -3.0, 3.0, 257)
    assert ConvexField.from_weight(power(g, 4.0, 1.0)).euler_residual() <= 1e-15


def test_pullback_identity():
    g = Grid.cube(2, -1.0, 1.0, 8)
    F, _ = affine_field(g, 1, 1, make_rng(0))
    out = pullback(GradientMap.identity(g), F)
    assert np.allclose(out.values, F.values, atol=1e-14)


def test_pullback_of_kahler_form():
    g = Grid.cube(2, -2.0, 2.0, 16)
    A = np.array([[2.0, 0.5], [0.5, 1.5]])
    keys = FormField.zeros(g, 1, 1).keys
    coeffs = [np.full(g.shape, A[I.bit_length() - 1, J.bit_length() - 1]) for I, J in keys]
    omega = FormField(g, 1, 1, np.array(coeffs))
    psi = GradientMap.linear(g, np.linalg.inv(A))
    out = pullback(psi, omega)
    Ai = np.linalg.inv(A)
    for s, (I, J) in enumerate(out.keys):
        assert np.allclose(out.values[s], Ai[I.bit_length() - 1, J.bit_length() - 1], atol=1e-13)


@pytest.mark.parametrize("p", [1, 2])
def test_pullback_isometry_pointwise(p):
    g = Grid.cube(2, -2.0, 2.0, 16)
    A = np.array([[2.0, 0.3], [0.3, 1.5]])
    w = quadratic(g, A)
    star = conjugate_weight(w, g)
    psi = GradientMap.of_weight(star)                # y -> A^{-1} y stays inside the box
    alpha, (c0, c1) = affine_field(g, p, 0, make_rng(p))
    pulled = pullback(psi, alpha)
    lhs = pointwise_inner(pulled, pulled, MetricField.hessian(star))
    # |alpha|^2 under omega^phi = A, evaluated at psi(y)
    img = np.moveaxis(psi.images, 0, -1)
    at = c0[:, None, None] + np.einsum("ki,...i->k...", c1, img)
    moved = FormField(g, p, 0, at)
    rhs = pointwise_inner(moved, moved, MetricField(g, np.broadcast_to(A, g.shape + (2, 2))))
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_pullback_commutes_with_j_and_composes():
    g = Grid.cube(2, -2.0, 2.0, 16)
    rng = make_rng(3)
    F, _ = affine_field(g, 1, 1, rng)
    psi1 = GradientMap.linear(g, [[0.5, 0.1], [0.0, 0.6]])
    psi2 = GradientMap.linear(g, [[0.9, 0.0], [0.2, 0.8]])
    assert np.allclose(pullback(psi1, j_field(F)).values, j_field(pullback(psi1, F)).values, atol=1e-13)
    both = pullback(compose(psi2, psi1), F)
    step = pullback(psi1, pullback(psi2, F))
    assert np.allclose(both.values, step.values, atol=1e-12)


def test_pullback_outside_domain_lists_points():
    g = Grid.cube(1, -1.0, 1.0, 8)
    F = FormField(g, 1, 0, np.ones((1,) + g.shape))
    with pytest.raises(ValueError, match="escape"):
        pullback(GradientMap.linear(g, [[3.0]]), F)
    out = pullback(GradientMap.linear(g, [[3.0]]), F, outside="zero").values[0]
    x = g.axes()[0]
    # dx pulls back to 3 dx inside; images beyond the ghost cell see zero
    assert np.all(out[np.abs(3 * x) <= 1.0] == 3.0)
    assert np.all(out[np.abs(3 * x) >= 1.0 + g.h[0]] == 0.0)


def test_dual_grid_reuses_primal_when_range_fits():
    g = Grid.cube(2, -2.0, 2.0, 16)
    assert dual_grid_for(quadratic(g)) is g
    big = dual_grid_for(power(g, 4.0, 0.25))
    assert big.hi[0] > 8.0


def test_homogeneous_check_self_dual():
    g = Grid.cube(1, -4.0, 4.0, 256)
    x = g.points()[..., 0]
    alpha = FormField(g, 1, 0, (x * np.exp(-x ** 2))[None])
    chk = homogeneous_check(power(g, 2.0, 0.5), alpha)
    assert chk.deviation <= 1e-12 and chk.euler_residual <= 1e-12


def test_homogeneous_check_rejects_nonhomogeneous():
    g = Grid.cube(1, -2.0, 2.0, 64)
    alpha = FormField(g, 1, 0, bump(g)[None])
    with pytest.raises(ValueError):
        homogeneous_check(parse_weight("quadratic+quartic", g), alpha, r=4.0)


def test_solve_homogeneous_zero_and_self_dual():
    g = Grid.cube(1, -3.0, 3.0, 256)
    phi = power(g, 2.0, 0.5)
    alpha, rep = solve_homogeneous(FormField.zeros(g, 1, 0), phi)
    assert alpha.max_abs() == 0.0 and rep.bound_satisfied
    beta = d(FormField(g, 0, 0, bump(g, 0.4)[None]))
    alpha, rep = solve_homogeneous(beta, phi, SolveConfig(tol=1e-10))
    direct, _ = solve_d(beta, phi, MetricField.hessian(phi), SolveConfig(tol=1e-10))
    assert rep.residual <= 1e-8 and rep.bound_satisfied
    assert np.max(np.abs(alpha.values - direct.values)) <= 1e-6 * np.max(np.abs(direct.values))
    assert rep.notes["transfer_defect"] <= 1e-8


def test_solve_homogeneous_rejects_bad_input():
    g = Grid.cube(2, -2.0, 2.0, 16)
    with pytest.raises(SolverError):
        solve_homogeneous(FormField.zeros(g, 1, 1), power(g, 2.0, 0.5))
