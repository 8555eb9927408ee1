"""Dictionary between super forms and complex forms on C^n.

dx_i -> dz_i and dxi_i -> dzbar_i is an isomorphism of exterior algebras, so a
complex form is stored exactly like a super form (same bitmask keys, same sign
rules) with complex coefficients.  The complex side carries the Kahler form
Omega = (i/2) sum dz_k ^ dzbar_k and the Hermitian metric it induces on C^n,
under which |dz_k|^2 = 2.

All conversion constants are a power of i times a power of 2, which binary
floating point represents exactly; monomial checks are therefore exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np

from .exterior import (
    GradedForm,
    PointForm,
    basis,
    basis_position,
    from_theta_coordinates,
    full_mask,
    homogeneous,
    j_sign,
    monomial_name,
    popcount,
    subsets,
    theta_coordinates,
    theta_sign,
    wedge,
)
from .metric import (
    MetricPoint,
    hodge_star,
    lefschetz_L,
    lefschetz_lambda,
    lefschetz_matrix_orthonormal,
    lefschetz_power,
    norm_sq,
    primitive_decompose,
)
from .polyforms import (
    poly_complexify,
    poly_d,
    poly_d_sharp,
    poly_del,
    poly_del_bar,
    random_polyform,
)

_I_POWERS = (1 + 0j, 1j, -1 + 0j, -1j)


def unit(a: int, b: int = 0) -> complex:
    """i^a 2^b, exactly."""
    return _I_POWERS[a % 4] * 2.0 ** b


def c_sign(p: int) -> int:
    """c_p = (-1)^{p(p-1)/2}, the sign with dx_I ^ dxi_I = c_p dV_{i_1} ^ ... ^ dV_{i_p}."""
    return -1 if (p * (p - 1) // 2) % 2 else 1


class ComplexPointForm(PointForm):
    """Complex form of bidegree (p, q): p factors dz, q factors dzbar."""

    def _combine(self, coeffs):
        return ComplexPointForm(self.n, self.p, self.q, coeffs)

    @classmethod
    def of(cls, a: GradedForm, p: int, q: int) -> "ComplexPointForm":
        return cls(a.n, p, q, {k: complex(c) for k, c in homogeneous(a, p, q).items()})

    def conjugate(self) -> "ComplexPointForm":
        """Complex conjugation: dz <-> dzbar on generators, conjugate coefficients."""
        return ComplexPointForm(self.n, self.q, self.p,
                                {(J, I): j_sign((I, J)) * c.conjugate() for (I, J), c in self.items()})

    def __repr__(self) -> str:
        if self.is_zero():
            return f"ComplexPointForm(0, n={self.n})"
        names = []
        for k, c in sorted(self.items()):
            names.append(f"{c!r}*" + monomial_name(k, self.n).replace("dxi", "dzb").replace("dx", "dz"))
        return f"ComplexPointForm({' + '.join(names)}, n={self.n})"


def cwedge(u: ComplexPointForm, v: ComplexPointForm) -> ComplexPointForm:
    return ComplexPointForm.of(wedge(u, v), u.p + v.p, u.q + v.q)


def theta_complex(I, J, K, n: int) -> ComplexPointForm:
    """dz_J ^ dzbar_K ^ dV^C_I with dV^C_i = dz_i ^ dzbar_i (index sets as bitmasks)."""
    sign = theta_sign(I, J, K)
    p, q = popcount(J | I), popcount(K | I)
    return ComplexPointForm(n, p, q, {(J | I, K | I): complex(sign)})


def complexify(a: PointForm) -> ComplexPointForm:
    """The map C: rewrite in the Theta basis and send each Theta to Theta^C."""
    out = ComplexPointForm(a.n, a.p, a.q)
    for (I, J, K), c in theta_coordinates(a).items():
        out = out + theta_complex(I, J, K, a.n) * complex(c)
    return out


def realify(v: ComplexPointForm, tol: float = 0.0) -> PointForm:
    """Inverse of C on forms with real coefficients."""
    if any(abs(c.imag) > tol for _, c in v.items()):
        raise ValueError("form has non-real coefficients")
    coords = {ijk: c.real for ijk, c in theta_coordinates(v).items()}
    return homogeneous(from_theta_coordinates(v.n, coords), v.p, v.q)


def big_omega(n: int) -> ComplexPointForm:
    """Omega = (i/2) sum_k dz_k ^ dzbar_k."""
    return ComplexPointForm(n, 1, 1, {(1 << k, 1 << k): 0.5j for k in range(n)})


def big_omega_n(n: int) -> ComplexPointForm:
    """Omega_n = Omega^n / n!."""
    out = ComplexPointForm(n, 0, 0, {(0, 0): 1 + 0j})
    for _ in range(n):
        out = cwedge(big_omega(n), out)
    return out / factorial(n)


def _weight(p: int, q: int) -> float:
    return 2.0 ** (p + q)


def hermitian_inner(u: ComplexPointForm, v: ComplexPointForm) -> complex:
    """Inner product induced by Omega: monomials orthogonal, |dz_A ^ dzbar_B|^2 = 2^{|A|+|B|}."""
    if (u.p, u.q) != (v.p, v.q):
        return 0j
    w = _weight(u.p, u.q)
    return sum((c * v[k].conjugate() for k, c in u.items()), 0j) * w


def coefficient_inner(u: ComplexPointForm, v: ComplexPointForm) -> complex:
    """sum of u_{IJK} conj(v_{IJK}) over Theta^C coordinates (each monomial of unit length)."""
    if (u.p, u.q) != (v.p, v.q):
        return 0j
    return sum((c * v[k].conjugate() for k, c in u.items()), 0j)


def lefschetz_omega(v: ComplexPointForm) -> ComplexPointForm:
    """L_Omega v = Omega ^ v."""
    return cwedge(big_omega(v.n), v)


def lambda_omega(v: ComplexPointForm) -> ComplexPointForm:
    """Adjoint of L_Omega for the Hermitian metric induced by Omega."""
    n, p, q = v.n, v.p, v.q
    if p == 0 or q == 0:
        return ComplexPointForm(n, max(p - 1, 0), max(q - 1, 0))
    L = 0.5j * lefschetz_matrix_orthonormal(n, p - 1, q - 1)
    adj = L.conj().T * (_weight(p, q) / _weight(p - 1, q - 1))
    vec = np.array(v.to_vector(), dtype=complex)
    return ComplexPointForm.from_vector(n, p - 1, q - 1, list(adj @ vec))


def weil_star_constant(n: int, p: int, q: int, m: int, conjugate_phase: bool = False) -> complex:
    """Constant of *_Omega on dz_A ^ dzbar_B ^ dV^C_M (|A| = p, |B| = q, k = p + q + 2m).

    The star fixed by ``v ^ *_Omega(conj v) = |v|^2 Omega_n`` has
    i^{q-p} (-1)^{k(k-1)/2+m} (-2i)^{k-n}.  ``conjugate_phase=True`` gives the variant
    with i^{p-q}, which is the conjugate operator and differs in sign for odd k.
    """
    k = p + q + 2 * m
    e = k - n
    sign = -1 if (k * (k - 1) // 2 + m) % 2 else 1
    phase = unit(p - q) if conjugate_phase else unit(q - p)
    return sign * phase * unit(3 * e, e)      # (-2i)^e = (-i)^e 2^e = i^{3e} 2^e


def real_star_constant(p: int, q: int, m: int) -> int:
    """c_p c_q (-1)^{p+m+pq}: the real star on dx_A ^ dxi_B ^ dV_M."""
    return c_sign(p) * c_sign(q) * (-1 if (p + m + p * q) % 2 else 1)


def star_conversion_constant(n: int, k: int) -> complex:
    """i^n 2^{n-k} (-1)^n, with C(*alpha) = this * *_Omega C(alpha) for k-forms."""
    return (-1) ** n * unit(n, n - k)


def complex_star(v: ComplexPointForm) -> ComplexPointForm:
    """*_Omega applied monomial-wise through the closed formula on Theta^C."""
    n = v.n
    top = full_mask(n)
    out = ComplexPointForm(n, n - v.q, n - v.p)
    for (A, B), c in v.items():
        M = A & B
        a, b = A & ~M, B & ~M
        coord = c * theta_sign(M, a, b)
        Mc = top & ~(a | b | M)
        const = weil_star_constant(n, popcount(a), popcount(b), popcount(M))
        out = out + theta_complex(Mc, a, b, n) * (const * coord)
    return out


def complex_star_from_definition(v: ComplexPointForm) -> ComplexPointForm:
    """*_Omega solved from u ^ *_Omega(w) = (u, conj w) Omega_n over all monomials u."""
    n = v.n
    top = (full_mask(n), full_mask(n))
    tp, tq = n - v.q, n - v.p
    vol = big_omega_n(n)[top]
    targets = basis(n, tp, tq)
    out = np.zeros(len(targets), dtype=complex)
    for (A, B), c in v.items():
        w = ComplexPointForm(n, v.p, v.q, {(A, B): 1 + 0j}).conjugate()
        rows, rhs = [], []
        for ukey in basis(n, w.p, w.q):
            u = ComplexPointForm(n, w.p, w.q, {ukey: 1 + 0j})
            rows.append([cwedge(u, ComplexPointForm(n, tp, tq, {t: 1 + 0j}))[top] for t in targets])
            rhs.append(hermitian_inner(u, w) * vol)
        out += c * np.linalg.solve(np.array(rows), np.array(rhs))
    return ComplexPointForm.from_vector(n, tp, tq, list(out))


def weil_star_lr_constant(n: int, p: int, q: int, r: int) -> float:
    """Real constant of *L^r on primitive dx_A ^ dxi_B obtained through C.

    Complex side: *_Omega L_Omega^r v = i^{p-q} (-1)^{k(k+1)/2} r!/(n-k-r)! L_Omega^{n-r-k} v.
    Conversions: C(L beta) = (2/i) L_Omega C(beta) and the star constant above.
    """
    k = p + q
    weil = unit(p - q) * (-1) ** (k * (k + 1) // 2) * factorial(r) / factorial(n - k - r)
    total = star_conversion_constant(n, k + 2 * r) * unit(-r, r) * weil * unit(n - r - k, -(n - r - k))
    if abs(total.imag) > 1e-12 * abs(total):
        raise ArithmeticError(f"conversion produced a non-real constant {total}")
    return total.real


def real_star_lr_constant(n: int, p: int, q: int, m: int, r: int) -> float:
    """(-1)^{k(k+1)/2+r+q+m} r!/(n-k-r)! with k = p + q + 2m (q counts the dxi factors)."""
    k = p + q + 2 * m
    return (-1) ** ((k * (k + 1) // 2 + r + q + m) % 2) * factorial(r) / factorial(n - k - r)


# ------------------------------------------------------------------ verification

@dataclass
class DictionaryReport:
    n: int
    deviations: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    notes: dict[str, object] = field(default_factory=dict)

    def record(self, name: str, value: float):
        self.deviations[name] = max(self.deviations.get(name, 0.0), float(value))
        self.counts[name] = self.counts.get(name, 0) + 1

    def passed(self, tol: float = 1e-12) -> bool:
        return all(v <= tol for v in self.deviations.values())


def _dev(a: GradedForm, b: GradedForm) -> float:
    return (a - b).max_abs()


def _all_monomials(n: int):
    for p in range(n + 1):
        for q in range(n + 1):
            for key in basis(n, p, q):
                yield PointForm(n, p, q, {key: 1.0})


def _random_forms(rng: np.random.Generator, n: int, trials: int):
    bideg = [(p, q) for p in range(n + 1) for q in range(n + 1)]
    for t in range(trials):
        p, q = bideg[t % len(bideg)]
        K = len(basis(n, p, q))
        yield PointForm.from_vector(n, p, q, list(rng.uniform(-1, 1, K)))


def _check_form(rep: DictionaryReport, a: PointForm, m: MetricPoint):
    n, k = a.n, a.degree
    v = complexify(a)
    rep.record("isometry", abs(coefficient_inner(v, v).real - norm_sq(a, m)))
    rep.record("omega-norm-scaling", abs(hermitian_inner(v, v).real - 2.0 ** k * norm_sq(a, m)))
    if a.p < n and a.q < n:
        rep.record("C-L", _dev(complexify(homogeneous(lefschetz_L(a, m), a.p + 1, a.q + 1)),
                               lefschetz_omega(v) * unit(-1, 1)))
    if a.p > 0 and a.q > 0:
        la = homogeneous(lefschetz_lambda(a, m), a.p - 1, a.q - 1)
        lv = lambda_omega(v)
        rep.record("C-Lambda", _dev(complexify(la), lv * unit(1, -1)))
        # primitivity equivalence, both directions
        prim = homogeneous(primitive_decompose(a, m)[0], a.p, a.q)
        rep.record("primitive-equivalence", lambda_omega(complexify(prim)).max_abs())
        rep.record("primitive-equivalence", float((la.max_abs() > 1e-9) != (lv.max_abs() > 1e-9)))
    star_a = homogeneous(hodge_star(a, m), n - a.q, n - a.p)
    rep.record("star-constant", _dev(complexify(star_a), complex_star(v) * star_conversion_constant(n, k)))
    # closed formula for *_Omega against its defining relation v ^ *_Omega(conj v) = |v|^2 Omega_n
    lhs = cwedge(v, complex_star(v.conjugate()))
    rep.record("complex-star-defining", _dev(lhs, big_omega_n(n) * hermitian_inner(v, v)))


def verify_dictionary(n: int, trials: int = 100, seed: int = 0, poly_trials: int = 4) -> DictionaryReport:
    """Run the point-level dictionary checks on every monomial plus ``trials`` random forms.

    Deviations are max-abs coefficient differences (0/1 indicators for the
    boolean checks); every check should come out at round-off level.
    """
    if not 1 <= n <= 4:
        raise ValueError(f"verify_dictionary supports 1 <= n <= 4, got {n}")
    rng = np.random.default_rng(seed)
    m = MetricPoint.identity(n)
    rep = DictionaryReport(n)
    for a in _all_monomials(n):
        _check_form(rep, a, m)
    for a in _random_forms(rng, n, trials):
        _check_form(rep, a, m)

    # injectivity: C has full rank on every bidegree
    for p in range(n + 1):
        for q in range(n + 1):
            cols = [complexify(a).to_vector() for a in _all_monomials(n) if (a.p, a.q) == (p, q)]
            M = np.array(cols, dtype=complex)
            rep.record("injectivity", float(comb(n, p) * comb(n, q) - np.linalg.matrix_rank(M)))

    # constant identity over all admissible (p, q, m)
    for p in range(n + 1):
        for q in range(n + 1 - p):
            for mm in range(n + 1 - p - q):
                k = p + q + 2 * mm
                ratio = real_star_constant(p, q, mm) / weil_star_constant(n, p, q, mm)
                rep.record("star-constant-identity", abs(ratio - star_conversion_constant(n, k)))
                alt = real_star_constant(p, q, mm) / weil_star_constant(n, p, q, mm, conjugate_phase=True)
                if abs(alt - star_conversion_constant(n, k)) > 0:
                    rep.notes.setdefault("conjugate-phase-mismatch", []).append((p, q, mm))

    # complex *L^r identity on primitive pure-type monomials, and the real constant it implies
    for p in range(n + 1):
        for q in range(n + 1 - p):
            k = p + q
            for A in subsets(n, p):
                for B in subsets(n, q):
                    if A & B:
                        continue
                    v = ComplexPointForm(n, p, q, {(A, B): 1 + 0j})
                    for r in range(n - k + 1):
                        left = v
                        for _ in range(r):
                            left = lefschetz_omega(left)
                        left = complex_star(left)
                        right = v
                        for _ in range(n - r - k):
                            right = lefschetz_omega(right)
                        const = unit(p - q) * (-1) ** (k * (k + 1) // 2) * factorial(r) / factorial(n - k - r)
                        rep.record("complex-star-L-r", _dev(left, right * const))
                        derived = weil_star_lr_constant(n, p, q, r)
                        rep.record("star-L-r-constant", abs(derived - real_star_lr_constant(n, p, q, 0, r)))
                        a = PointForm(n, p, q, {(A, B): 1.0})
                        real_lhs = hodge_star(lefschetz_power(a, m, r), m)
                        real_rhs = lefschetz_power(a, m, n - r - k) * derived
                        rep.record("star-L-r-real", _dev(real_lhs, real_rhs))

    # field level: C(d alpha) = 2 del C(alpha) and C(d# alpha) = 2 delbar C(alpha), exactly
    for t in range(poly_trials):
        p, q = int(rng.integers(0, n)), int(rng.integers(0, n))
        F = random_polyform(rng, n, p, q, degree=3)
        rep.record("C-d-del", float(not poly_complexify(poly_d(F)) == 2 * poly_del(poly_complexify(F))))
        rep.record("C-dsharp-delbar",
                   float(not poly_complexify(poly_d_sharp(F)) == 2 * poly_del_bar(poly_complexify(F))))
    return rep
