import pytest
import sympy as sp

from superforms.bridge import (
    ComplexPointForm,
    big_omega,
    coefficient_inner,
    complex_star,
    complex_star_from_definition,
    complexify,
    hermitian_inner,
    lambda_omega,
    lefschetz_omega,
    real_star_constant,
    realify,
    star_conversion_constant,
    verify_dictionary,
    weil_star_constant,
)
from superforms.exterior import monomial, one
from superforms.metric import MetricPoint, lefschetz_L, norm_sq, omega
from superforms.polyforms import PolyForm, poly_complexify, poly_d, poly_del, real_symbols
from superforms.sampling import make_rng, random_point_form


def test_complexify_examples():
    assert complexify(one(2)) == ComplexPointForm(2, 0, 0, {(0, 0): 1 + 0j})
    v = complexify(monomial(1, [1], [1]))
    assert v == ComplexPointForm(1, 1, 1, {(1, 1): 1 + 0j})


@pytest.mark.parametrize("n", [1, 2, 3])
def test_coefficient_isometry(n):
    rng = make_rng(n)
    m = MetricPoint.identity(n)
    for _ in range(100):
        p, q = rng.integers(0, n + 1, 2)
        a = random_point_form(rng, n, int(p), int(q))
        v = complexify(a)
        assert coefficient_inner(v, v).real == pytest.approx(norm_sq(a, m), abs=1e-12)
        # under the Hermitian metric of Omega the norm picks up 2^k
        assert hermitian_inner(v, v).real == pytest.approx(2.0 ** a.degree * norm_sq(a, m), abs=1e-11)


def test_realify_inverts_complexify():
    rng = make_rng(5)
    a = random_point_form(rng, 3, 2, 1)
    assert (realify(complexify(a)) - a).max_abs() < 1e-15


def test_intertwining_on_omega():
    m = MetricPoint.identity(2)
    a = omega(m)
    lhs = complexify(lefschetz_L(a, m))
    rhs = lefschetz_omega(complexify(a)) * (2 / 1j)
    assert (lhs - rhs).max_abs() == 0.0


def test_primitive_maps_to_primitive():
    a = monomial(2, [1], [2])
    assert lambda_omega(complexify(a)).max_abs() == 0.0


def test_star_of_one_is_big_omega_n1():
    s = complex_star(ComplexPointForm(1, 0, 0, {(0, 0): 1 + 0j}))
    assert (s - big_omega(1)).max_abs() == 0.0


@pytest.mark.parametrize("n", [1, 2, 3])
def test_closed_star_matches_definition(n):
    rng = make_rng(n)
    for p in range(n + 1):
        for q in range(n + 1):
            v = complexify(random_point_form(rng, n, p, q))
            assert (complex_star(v) - complex_star_from_definition(v)).max_abs() < 1e-12


def test_star_constant_identity_exhaustive():
    for n in range(1, 5):
        for p in range(n + 1):
            for q in range(n + 1 - p):
                for mm in range(n + 1 - p - q):
                    k = p + q + 2 * mm
                    ratio = real_star_constant(p, q, mm) / weil_star_constant(n, p, q, mm)
                    assert ratio == star_conversion_constant(n, k)


def test_conjugate_phase_differs_for_odd_degree():
    # the i^{p-q} variant is the conjugate operator; it disagrees exactly when p - q is odd
    n = 3
    for p in range(n + 1):
        for q in range(n + 1 - p):
            a = weil_star_constant(n, p, q, 0)
            b = weil_star_constant(n, p, q, 0, conjugate_phase=True)
            assert (a == b) == ((p - q) % 2 == 0)


def test_d_to_del_example():
    # alpha = x_1 dx_2 in n = 2: C(d alpha) = dz_1 ^ dz_2 = 2 del C(alpha)
    x = real_symbols(2)
    alpha = PolyForm(2, 1, 0, {(2, 0): sp.Poly(x[0], *x, domain="QQ")})
    lhs = poly_complexify(poly_d(alpha))
    rhs = 2 * poly_del(poly_complexify(alpha))
    assert lhs == rhs
    (key, c), = lhs.coeffs.items()
    assert key == (3, 0) and c.as_expr() == 1


@pytest.mark.parametrize("n", [1, 2, 3])
def test_verify_dictionary(n):
    rep = verify_dictionary(n, trials=30, seed=n)
    assert rep.passed(1e-12), rep.deviations
    assert rep.notes.get("conjugate-phase-mismatch")


def test_verify_dictionary_range():
    with pytest.raises(ValueError):
        verify_dictionary(5)
