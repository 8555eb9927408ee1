"""Pointwise metric structure induced by a positive (1,1)-form.

All operators are computed in an orthonormal coframe obtained from the
Cholesky factor ``G = C C^T``: a one-form with coordinate coefficients ``a``
has coefficients ``C^{-1} a`` in the orthonormal coframe, and a (p, q)-form
transforms by the Kronecker product of the p-th and q-th compound matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np

from .exterior import (
    GradedForm,
    PointForm,
    basis,
    basis_position,
    full_mask,
    homogeneous,
    j_sign,
    mask_indices,
    monomial_product,
    subsets,
    theta,
    wedge,
)


def compound(M: np.ndarray, p: int) -> np.ndarray:
    """p-th compound matrix: minors det(M[K, I]) for p-subsets in mask order.

    Works on stacks: ``M`` may have shape ``(..., n, n)``.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[-1]
    sets = [mask_indices(s) for s in subsets(n, p)]
    if p == 0:
        return np.ones(M.shape[:-2] + (1, 1))
    out = np.empty(M.shape[:-2] + (len(sets), len(sets)))
    for r, rows in enumerate(sets):
        for c, cols in enumerate(sets):
            out[..., r, c] = np.linalg.det(M[..., rows, :][..., :, cols]) if p > 1 \
                else M[..., rows[0], cols[0]]
    return out


def bidegree_transform(M: np.ndarray, p: int, q: int) -> np.ndarray:
    """Action of a coframe change ``M`` on (p, q)-form coefficient vectors."""
    A, B = compound(M, p), compound(M, q)
    if A.ndim == 2:
        return np.kron(A, B)
    return np.einsum("...ik,...jl->...ijkl", A, B).reshape(
        A.shape[:-2] + (A.shape[-2] * B.shape[-2], A.shape[-1] * B.shape[-1]))


@dataclass(frozen=True)
class FrameChange:
    """T maps orthonormal coefficients back to coordinates; Tinv the reverse."""

    T: np.ndarray
    Tinv: np.ndarray

    def to_orthonormal(self, p: int, q: int) -> np.ndarray:
        return bidegree_transform(self.Tinv, p, q)

    def from_orthonormal(self, p: int, q: int) -> np.ndarray:
        return bidegree_transform(self.T, p, q)


@dataclass(frozen=True)
class MetricPoint:
    """Coefficient matrix ``omega_ij`` of a positive (1,1)-form at one point."""

    G: np.ndarray
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        G = np.array(self.G, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ValueError(f"metric must be a square matrix, got shape {G.shape}")
        if not np.array_equal(G, G.T):
            raise ValueError("metric matrix is not symmetric")
        try:
            C = np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            raise ValueError("metric matrix is not positive definite") from None
        if not np.all(np.diag(C) > 0):
            raise ValueError("metric matrix is not positive definite")
        G.setflags(write=False)
        C.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "chol", C)

    @classmethod
    def identity(cls, n: int) -> "MetricPoint":
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return self.G.shape[0]

    @property
    def frame(self) -> FrameChange:
        return FrameChange(self.chol, np.linalg.inv(self.chol))

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.G)


def _vector(a: PointForm) -> np.ndarray:
    return np.array(a.to_vector(), dtype=float)


def _check(a: GradedForm, m: MetricPoint):
    if a.n != m.n:
        raise ValueError(f"form dimension {a.n} does not match metric dimension {m.n}")


def omega(m: MetricPoint) -> PointForm:
    """The (1,1)-form sum_ij omega_ij dx_i ^ dxi_j."""
    n = m.n
    return PointForm(n, 1, 1, {(1 << i, 1 << j): float(m.G[i, j])
                               for i in range(n) for j in range(n)})


def volume_form(m: MetricPoint) -> PointForm:
    """omega_n = omega^n / n!."""
    out = PointForm(m.n, 0, 0, {(0, 0): 1.0})
    w = omega(m)
    for _ in range(m.n):
        out = wedge(w, out)
    return out / factorial(m.n)


def inner(a: GradedForm, b: GradedForm, m: MetricPoint) -> float:
    """Pointwise inner product; different bidegrees are orthogonal."""
    _check(a, m)
    _check(b, m)
    pa, pb = a.parts(), b.parts()
    total = 0.0
    frame = m.frame
    for pq in pa.keys() & pb.keys():
        A = frame.to_orthonormal(*pq)
        total += float((A @ _vector(pa[pq])) @ (A @ _vector(pb[pq])))
    return total


def norm_sq(a: GradedForm, m: MetricPoint) -> float:
    return inner(a, a, m)


def gram_matrix(m: MetricPoint, p: int, q: int) -> np.ndarray:
    """Gram matrix of the (p, q) coordinate monomials: compounds of omega^{-1}."""
    return bidegree_transform(m.inverse, p, q)


@lru_cache(maxsize=None)
def _wedge_matrix_cached(n: int, key, p: int, q: int) -> np.ndarray:
    dp, dq = len(mask_indices(key[0])), len(mask_indices(key[1]))
    src = basis(n, p, q)
    if p + dp > n or q + dq > n:
        return np.zeros((0, len(src)))
    pos = basis_position(n, p + dp, q + dq)
    M = np.zeros((len(pos), len(src)))
    for c, k in enumerate(src):
        s, t = monomial_product(key, k)
        if s:
            M[pos[t], c] = s
    M.setflags(write=False)
    return M


def monomial_wedge_matrix(n: int, key, p: int, q: int) -> np.ndarray:
    """Matrix of left multiplication by the monomial ``key`` on (p, q)-forms."""
    return _wedge_matrix_cached(n, tuple(key), p, q)


@lru_cache(maxsize=None)
def lefschetz_matrix_orthonormal(n: int, p: int, q: int) -> np.ndarray:
    """Integer matrix of L = (sum_k dV_k) ^ . from (p, q) to (p+1, q+1)."""
    out = None
    for k in range(n):
        M = monomial_wedge_matrix(n, (1 << k, 1 << k), p, q)
        out = M.copy() if out is None else out + M
    out.setflags(write=False)
    return out


def lefschetz_matrix(m: MetricPoint, p: int, q: int) -> np.ndarray:
    """Matrix of L = omega ^ . from (p, q) to (p+1, q+1) in coordinates."""
    n = m.n
    out = None
    for i in range(n):
        for j in range(n):
            M = m.G[i, j] * monomial_wedge_matrix(n, (1 << i, 1 << j), p, q)
            out = M if out is None else out + M
    return out


@lru_cache(maxsize=None)
def star_matrix_orthonormal(n: int, p: int, q: int) -> np.ndarray:
    """Hodge star from (p, q) to (n-q, n-p) in an orthonormal coframe.

    *(dx_I ^ dxi_J) = c dx_{J^c} ^ dxi_{I^c}; the sign c is solved from
    ``e ^ *(J e) = omega_n`` with e = J(dx_I ^ dxi_J) up to its sign.
    """
    top = full_mask(n)
    vol = theta(top, 0, 0, n)[(top, top)]  # omega_n coefficient on dx_N ^ dxi_N
    src = basis(n, p, q)
    pos = basis_position(n, n - q, n - p)
    S = np.zeros((len(pos), len(src)))
    for c, (I, J) in enumerate(src):
        target = (top ^ J, top ^ I)
        s, k = monomial_product((J, I), target)
        assert s and k == (top, top)
        S[pos[target], c] = vol * s * j_sign((I, J))
    S.setflags(write=False)
    return S


def hodge_star(a: GradedForm, m: MetricPoint) -> GradedForm:
    """Hodge star defined by ``alpha ^ *(J beta) = (alpha, beta) omega_n``."""
    _check(a, m)
    n = m.n
    frame = m.frame
    out = GradedForm(n)
    for (p, q), part in a.parts().items():
        M = frame.from_orthonormal(n - q, n - p) @ star_matrix_orthonormal(n, p, q) \
            @ frame.to_orthonormal(p, q)
        out = out + PointForm.from_vector(n, n - q, n - p, M @ _vector(part))
    if isinstance(a, PointForm):
        return homogeneous(out, n - a.q, n - a.p)
    return out


def lefschetz_L(a: GradedForm, m: MetricPoint) -> GradedForm:
    """L(alpha) = omega ^ alpha."""
    _check(a, m)
    return wedge(omega(m), a)


def lefschetz_lambda(a: GradedForm, m: MetricPoint) -> GradedForm:
    """Adjoint of L, computed as the transpose of L in an orthonormal coframe."""
    _check(a, m)
    n = m.n
    frame = m.frame
    out = GradedForm(n)
    for (p, q), part in a.parts().items():
        if p == 0 or q == 0:
            continue
        Lt = lefschetz_matrix_orthonormal(n, p - 1, q - 1).T
        M = frame.from_orthonormal(p - 1, q - 1) @ Lt @ frame.to_orthonormal(p, q)
        out = out + PointForm.from_vector(n, p - 1, q - 1, M @ _vector(part))
    if isinstance(a, PointForm):
        if a.p == 0 or a.q == 0:
            return GradedForm(n)
        return homogeneous(out, a.p - 1, a.q - 1)
    return out


def lefschetz_power_matrix(m: MetricPoint, p: int, q: int, r: int) -> np.ndarray:
    """Matrix of L^r from (p, q) to (p+r, q+r) in coordinates."""
    dim = len(basis(m.n, p, q))
    M = np.eye(dim)
    for s in range(r):
        M = lefschetz_matrix(m, p + s, q + s) @ M
    return M


def lefschetz_inverse(b: GradedForm, k: int, m: MetricPoint) -> GradedForm:
    """The unique k-form a with L^{n-k} a = b (k <= n)."""
    _check(b, m)
    n = m.n
    if not 0 <= k <= n:
        raise ValueError(f"Lefschetz inverse needs 0 <= k <= n, got k={k}, n={n}")
    r = n - k
    out = GradedForm(n)
    for (p2, q2), part in b.parts().items():
        if p2 + q2 != 2 * n - k:
            raise ValueError(f"component of bidegree ({p2}, {q2}) is not of degree {2 * n - k}")
        p, q = p2 - r, q2 - r
        M = lefschetz_power_matrix(m, p, q, r)
        rhs = _vector(part)
        sol = np.linalg.solve(M, rhs)
        resid = np.linalg.norm(M @ sol - rhs)
        if resid > 1e-10 * max(np.linalg.norm(rhs), 1.0):
            raise ArithmeticError(f"L^{r} is numerically singular on ({p}, {q})-forms")
        out = out + PointForm.from_vector(n, p, q, sol)
    return out


def _decompose_orthonormal(vec: np.ndarray, n: int, p: int, q: int) -> list[np.ndarray]:
    """Primitive pieces of an orthonormal-frame (p, q) vector, k = p + q <= n."""
    if p == 0 or q == 0:
        return [vec]
    Lm = lefschetz_matrix_orthonormal(n, p - 1, q - 1)
    # ker(Lambda) is the orthogonal complement of range(L)
    beta, *_ = np.linalg.lstsq(Lm, vec, rcond=None)
    prim = vec - Lm @ beta
    return [prim] + _decompose_orthonormal(beta, n, p - 1, q - 1)


def primitive_decompose(a: GradedForm, m: MetricPoint) -> list[GradedForm]:
    """Return [a_0, ..., a_s] with a = sum_j L^j a_j and every a_j primitive.

    ``a`` must have pure total degree k.  For k > n the form is first written
    as L^{k-n} b with b of degree 2n - k, and b is decomposed.
    """
    _check(a, m)
    n = m.n
    degrees = {p + q for p, q in a.bidegrees()}
    if len(degrees) > 1:
        raise ValueError(f"form has mixed total degrees {sorted(degrees)}")
    if not degrees:
        return [GradedForm(n)]
    k = degrees.pop()
    frame = m.frame
    pieces: dict[int, GradedForm] = {}
    for (p, q), part in a.parts().items():
        vec = frame.to_orthonormal(p, q) @ _vector(part)
        shift = 0
        if k > n:
            shift = k - n
            p, q = p - shift, q - shift
            Lr = np.eye(len(basis(n, p, q)))
            for s in range(shift):
                Lr = lefschetz_matrix_orthonormal(n, p + s, q + s) @ Lr
            vec = np.linalg.solve(Lr, vec)
        for j, comp in enumerate(_decompose_orthonormal(vec, n, p, q)):
            coords = frame.from_orthonormal(p - j, q - j) @ comp
            piece = PointForm.from_vector(n, p - j, q - j, coords)
            pieces[j + shift] = pieces.get(j + shift, GradedForm(n)) + piece
    s = max(pieces)
    return [pieces.get(j, GradedForm(n)) for j in range(s + 1)]


def lefschetz_power(a: GradedForm, m: MetricPoint, r: int) -> GradedForm:
    out = a
    for _ in range(r):
        out = lefschetz_L(out, m)
    return out
