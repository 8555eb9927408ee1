import numpy as np
import pytest

from superforms.calculus import FormField, Grid, MetricField, box, d, weighted_norm_sq
from superforms.sampling import bump, make_rng, random_closed_field, random_field
from superforms.solver import (
    SolveConfig,
    SolverError,
    bound_constant,
    pcg,
    probe_diagonal,
    solve_box,
    solve_d,
    verify_estimate,
)
from superforms.suites import dense_minimal_norm
from superforms.weights import parse_weight, quadratic


def small_problem(seed=0, p=1, m=12):
    g = Grid.cube(2, -2.5, 2.5, m)
    w = quadratic(g)
    beta = random_closed_field(make_rng(seed), g, p, 2, radius=1.5)
    return g, w, MetricField.identity(g), beta


def test_pcg_matches_dense_solve():
    rng = make_rng(0)
    M = rng.standard_normal((30, 30))
    A = M @ M.T + 30 * np.eye(30)
    b = rng.standard_normal(30)
    res = pcg(lambda v: A @ v, b, lambda v: v, np.diag(A), 1e-12, 500)
    assert np.allclose(res.x, np.linalg.solve(A, b), atol=1e-9)
    assert res.residual <= 1e-12


def test_pcg_zero_rhs():
    res = pcg(lambda v: v, np.zeros(5), lambda v: v, np.ones(5), 1e-10, 10)
    assert res.iterations == 0 and not res.x.any()


def test_probe_diagonal_exact():
    g, w, G, beta = small_problem()
    from superforms.solver import _weight_operator
    from superforms.calculus import adjoint_d
    W = _weight_operator(G, w, 1, 2)
    A = lambda v: W(d(adjoint_d(FormField(g, 1, 2, v), w, G)).values)   # noqa: E731
    diag = probe_diagonal(A, beta.values.shape, False)
    for idx in [(0, 0, 0), (1, 5, 7), (0, 11, 11)]:
        e = np.zeros(beta.values.shape)
        e[idx] = 1.0
        assert diag[idx] == pytest.approx(A(e)[idx], rel=1e-14)


def test_solve_zero():
    g, w, G, beta = small_problem()
    alpha, rep = solve_d(FormField.zeros(g, 1, 2), w, G)
    assert rep.iterations == 0 and alpha.max_abs() == 0.0


def test_solve_matches_dense_oracle_and_bound():
    g, w, G, beta = small_problem(m=8)
    alpha, rep = solve_d(beta, w, G, SolveConfig(bound_kind="p-epsilon"))
    assert rep.residual <= 1e-8
    assert rep.bound_constant == pytest.approx(1.0)
    assert rep.bound_satisfied
    ref = dense_minimal_norm(beta, w, G)
    assert np.linalg.norm(ref.values - alpha.values) <= 1e-6 * np.linalg.norm(ref.values)


def test_minimal_norm_orthogonal_to_closed_perturbations():
    g, w, G, beta = small_problem(p=2)
    alpha, _ = solve_d(beta, w, G)
    rng = make_rng(9)
    base = weighted_norm_sq(alpha, w, G)
    for _ in range(5):
        k = d(random_field(rng, g, 0, 2, center=rng.uniform(-0.5, 0.5, 2)))
        assert weighted_norm_sq(alpha + k, w, G) >= base


def test_nonclosed_beta_rejected():
    g = Grid.cube(2, -2.0, 2.0, 12)
    beta = random_field(make_rng(1), g, 1, 1)
    with pytest.raises(SolverError, match="not closed"):
        solve_d(beta, quadratic(g), MetricField.identity(g))


def test_verify_estimate_detects_scaling():
    g, w, G, beta = small_problem(m=48)
    alpha, rep = solve_d(beta, w, G, SolveConfig(bound_kind="p-epsilon"))
    again = verify_estimate(alpha, beta, w, G, rep.bound_constant)
    assert again.bound_satisfied
    big = verify_estimate(alpha * 10.0, beta, w, G, rep.bound_constant)
    assert big.ratio == pytest.approx(100 * rep.ratio)
    assert not big.bound_satisfied


def test_bound_monotone_under_stronger_convexity():
    g, w, G, beta = small_problem()
    cfg = SolveConfig(bound_kind="p-epsilon")
    assert bound_constant(beta, w.scaled(2.0), G, cfg) <= bound_constant(beta, w, G, cfg)


def test_bound_preconditions():
    g, w, G, beta = small_problem()
    with pytest.raises(SolverError):
        bound_constant(beta, w, MetricField(g, 2 * np.eye(2)), SolveConfig(bound_kind="k-minus-n"))
    low = random_closed_field(make_rng(2), g, 1, 0)
    with pytest.raises(SolverError):
        bound_constant(low, w, G, SolveConfig(bound_kind="p-epsilon"))      # q != n
    with pytest.raises(SolverError):
        bound_constant(beta, w, G, SolveConfig(bound_kind="homogeneous"))


def test_solve_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(tol=0.0)
    with pytest.raises(ValueError):
        SolveConfig(bound_kind="bogus")
    with pytest.raises(ValueError):
        SolveConfig(flavor="heat")


def test_solve_box_zero_and_example():
    g = Grid.cube(1, -4.0, 4.0, 256)
    w = quadratic(g)
    alpha, rep = solve_box(FormField.zeros(g, 1, 1), w)
    assert alpha.max_abs() == 0.0
    beta = FormField(g, 1, 1, bump(g, 0.3)[None])
    alpha, rep = solve_box(beta, w, SolveConfig(tol=1e-10, flavor="box-equation"))
    assert rep.residual <= 1e-8
    assert rep.bound_satisfied
    G = MetricField.hessian(w.on_grid(g.with_boundary("free")))
    ga = FormField(g.with_boundary("free"), 1, 1, alpha.values)
    lhs = box(ga, w.on_grid(ga.grid), G, "d").values
    assert np.max(np.abs(lhs - beta.values)) <= 1e-6 * np.max(np.abs(beta.values))


def test_solve_box_needs_k_above_n():
    g = Grid.cube(2, -2.0, 2.0, 8)
    with pytest.raises(SolverError):
        solve_box(random_closed_field(make_rng(0), g, 1, 1), quadratic(g))


def test_concave_solve():
    g = Grid.cube(2, -3.0, 3.0, 32)
    w = quadratic(g, -1.0)
    G = MetricField.neg_hessian(w)
    beta = random_closed_field(make_rng(4), g, 1, 0, radius=1.5)
    alpha, rep = solve_d(beta, w, G, SolveConfig(bound_kind="concave"))
    assert rep.bound_constant == 1.0
    assert rep.bound_satisfied and rep.residual <= 1e-8


def test_free_boundary_helps_box_solve():
    g = Grid.cube(1, -4.0, 4.0, 256)
    w = parse_weight("quadratic", g)
    beta = FormField(g, 1, 1, bump(g, -0.5)[None])
    _, free = solve_box(beta, w, SolveConfig(flavor="box-equation"), boundary="free")
    assert free.bound_satisfied
