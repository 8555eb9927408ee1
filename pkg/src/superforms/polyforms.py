"""Super forms with polynomial coefficients, differentiated exactly with sympy.

Used where a differential identity should be checked without any grid error:
d# = J d J on the real side, and the Wirtinger relations on the complex side
(coefficients rewritten in z, zbar through x = (z + zbar) / 2).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import sympy as sp

from .exterior import Key, basis, basis_position, j_sign, monomial_product


@lru_cache(maxsize=None)
def real_symbols(n: int) -> tuple[sp.Symbol, ...]:
    return sp.symbols(f"x1:{n + 1}", real=True)


@lru_cache(maxsize=None)
def complex_symbols(n: int) -> tuple[tuple[sp.Symbol, ...], tuple[sp.Symbol, ...]]:
    """(z, zbar), treated as independent variables."""
    return sp.symbols(f"z1:{n + 1}"), sp.symbols(f"zb1:{n + 1}")


class PolyForm:
    """Homogeneous form of bidegree (p, q) with sympy polynomial coefficients over QQ."""

    def __init__(self, n: int, p: int, q: int, coeffs: dict[Key, sp.Poly]):
        self.n, self.p, self.q = n, p, q
        self.coeffs = {k: c for k, c in coeffs.items() if not c.is_zero}

    def __sub__(self, other: "PolyForm") -> "PolyForm":
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out[k] - c if k in out else -c
        return PolyForm(self.n, self.p, self.q, out)

    def __mul__(self, scalar) -> "PolyForm":
        return PolyForm(self.n, self.p, self.q, {k: scalar * c for k, c in self.coeffs.items()})

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other) -> bool:
        return isinstance(other, PolyForm) and (self - other).is_zero()

    def __repr__(self) -> str:
        return f"PolyForm(n={self.n}, ({self.p},{self.q}), {self.coeffs})"


def random_polyform(rng: np.random.Generator, n: int, p: int, q: int, degree: int = 3) -> PolyForm:
    """Integer-coefficient polynomials of total degree <= ``degree`` in each slot."""
    xs = real_symbols(n)
    monos = sorted(sp.itermonomials(xs, degree), key=sp.default_sort_key)
    coeffs = {}
    for key in basis(n, p, q):
        ints = rng.integers(-3, 4, size=len(monos))
        expr = sum(int(c) * m for c, m in zip(ints, monos))
        coeffs[key] = sp.Poly(expr, *xs, domain="QQ")
    return PolyForm(n, p, q, coeffs)


def _raise(F: PolyForm, generator: Key, variables, shift: tuple[int, int]) -> PolyForm:
    out: dict[Key, sp.Poly] = {}
    for key, c in F.coeffs.items():
        for l, v in enumerate(variables):
            gen = (generator[0] << l, generator[1] << l)
            sign, target = monomial_product(gen, key)
            if sign:
                term = c.diff(v) * sign
                out[target] = out[target] + term if target in out else term
    return PolyForm(F.n, F.p + shift[0], F.q + shift[1], out)


def poly_d(F: PolyForm) -> PolyForm:
    return _raise(F, (1, 0), real_symbols(F.n), (1, 0))


def poly_d_sharp(F: PolyForm) -> PolyForm:
    """d# = sum_l d/dx_l dxi_l ^ ."""
    return _raise(F, (0, 1), real_symbols(F.n), (0, 1))


def poly_j(F: PolyForm) -> PolyForm:
    return PolyForm(F.n, F.q, F.p, {(J, I): j_sign((I, J)) * c for (I, J), c in F.coeffs.items()})


def poly_complexify(F: PolyForm) -> PolyForm:
    """Same monomials with dx -> dz, dxi -> dzbar; coefficients rewritten in z, zbar."""
    xs = real_symbols(F.n)
    z, zb = complex_symbols(F.n)
    sub = {x: (a + b) / 2 for x, a, b in zip(xs, z, zb)}
    return PolyForm(F.n, F.p, F.q, {k: sp.Poly(c.as_expr().subs(sub), *z, *zb, domain="QQ")
                                    for k, c in F.coeffs.items()})


def poly_del(V: PolyForm) -> PolyForm:
    """Holomorphic differential: sum_l d/dz_l dz_l ^ ."""
    return _raise(V, (1, 0), complex_symbols(V.n)[0], (1, 0))


def poly_del_bar(V: PolyForm) -> PolyForm:
    return _raise(V, (0, 1), complex_symbols(V.n)[1], (0, 1))


# Batched variant: coefficients of shape (keys, batch, M) over the M monomials of
# total degree <= degree, listed by ``exponents``; derivatives are integer matrices,
# so everything stays exact while the integers stay below 2^53.

@lru_cache(maxsize=None)
def exponents(n: int, degree: int) -> tuple[tuple[int, ...], ...]:
    out = [e for e in np.ndindex(*(degree + 1,) * n) if sum(e) <= degree]
    return tuple(sorted(out, key=lambda e: (sum(e), e)))


@lru_cache(maxsize=None)
def derivative_matrix(n: int, degree: int, l: int) -> np.ndarray:
    """D with (D c)[target] = coefficient of d/dx_l applied to sum_e c[e] x^e."""
    ex = exponents(n, degree)
    pos = {e: i for i, e in enumerate(ex)}
    D = np.zeros((len(ex), len(ex)))
    for i, e in enumerate(ex):
        if e[l]:
            f = list(e)
            f[l] -= 1
            D[pos[tuple(f)], i] = e[l]
    D.setflags(write=False)
    return D


def random_poly_array(rng: np.random.Generator, n: int, p: int, q: int, batch: int,
                      degree: int = 3) -> np.ndarray:
    """Integer coefficients in [-3, 3], shape (keys, batch, monomials)."""
    return rng.integers(-3, 4, size=(len(basis(n, p, q)), batch, len(exponents(n, degree)))).astype(float)


def _array_raise(vals: np.ndarray, n: int, p: int, q: int, generator: Key, degree: int) -> np.ndarray:
    dp, dq = generator
    pos = basis_position(n, p + dp, q + dq)
    out = np.zeros((len(pos),) + vals.shape[1:])
    for l in range(n):
        deriv = vals @ derivative_matrix(n, degree, l).T
        gen = (dp << l, dq << l)
        for s, key in enumerate(basis(n, p, q)):
            sign, target = monomial_product(gen, key)
            if sign:
                out[pos[target]] += sign * deriv[s]
    return out


def array_d(vals: np.ndarray, n: int, p: int, q: int, degree: int = 3) -> np.ndarray:
    return _array_raise(vals, n, p, q, (1, 0), degree)


def array_d_sharp(vals: np.ndarray, n: int, p: int, q: int, degree: int = 3) -> np.ndarray:
    return _array_raise(vals, n, p, q, (0, 1), degree)


def array_j(vals: np.ndarray, n: int, p: int, q: int) -> np.ndarray:
    pos = basis_position(n, q, p)
    out = np.zeros_like(vals)
    for s, (I, J) in enumerate(basis(n, p, q)):
        out[pos[(J, I)]] = j_sign((I, J)) * vals[s]
    return out
