"""Grid-sampled super forms and the weighted differential operators acting on them.

Coefficients live on cell centres of a box grid.  ``d`` and ``d#`` use forward
differences; beyond the last cell the field is either zero (Dirichlet padding)
or wraps around (periodic), or the last difference along an axis is dropped
("free", whose kernel on functions is exactly the constants).  Adjoints are the exact transposes of these
matrices under the discrete weighted inner product

    <A, B>_phi = sum_x (A(x), B(x))_{G(x)} exp(-phi(x)) det G(x) prod(h),

so integration by parts holds to round-off on every grid.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from .exterior import (
    Key,
    PointForm,
    basis,
    basis_position,
    j_sign,
    monomial_product,
)
from .metric import bidegree_transform, monomial_wedge_matrix

BOUNDARIES = ("zero", "periodic", "free")
MAX_POINTS = 1 << 22


@dataclass(frozen=True)
class Grid:
    """Uniform box grid of cell centres ``lo + (i + 1/2) h``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    m: tuple[int, ...]
    boundary: str = "zero"

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        m = tuple(int(v) for v in np.atleast_1d(self.m))
        if not (len(lo) == len(hi) == len(m)):
            raise ValueError("lo, hi and m must have the same length")
        if not 1 <= len(m) <= 16:
            raise ValueError(f"dimension must be in 1..16, got {len(m)}")
        if any(k < 4 for k in m):
            raise ValueError(f"need at least 4 points per axis, got {m}")
        if any(b <= a for a, b in zip(lo, hi)):
            raise ValueError("every axis needs hi > lo")
        if int(np.prod(m)) > MAX_POINTS:
            raise ValueError(f"grid has {int(np.prod(m))} points, cap is {MAX_POINTS}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "m", m)

    @classmethod
    def cube(cls, n: int, lo: float, hi: float, m: int, boundary: str = "zero") -> "Grid":
        return cls((lo,) * n, (hi,) * n, (m,) * n, boundary)

    @property
    def n(self) -> int:
        return len(self.m)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.m

    @property
    def size(self) -> int:
        return int(np.prod(self.m))

    @property
    def h(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / np.array(self.m)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def diam(self) -> float:
        return float(np.linalg.norm(np.array(self.hi) - np.array(self.lo)))

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    def axes(self) -> list[np.ndarray]:
        return [a + (np.arange(k) + 0.5) * h for a, k, h in zip(self.lo, self.m, self.h)]

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self) -> np.ndarray:
        """Coordinates with shape ``(*shape, n)``."""
        return np.stack(self.mesh(), axis=-1)

    def with_boundary(self, boundary: str) -> "Grid":
        return Grid(self.lo, self.hi, self.m, boundary)

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.lo, self.hi, tuple(k * factor for k in self.m), self.boundary)

    def collar_mask(self, width: int = 2) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.n):
            idx = [slice(None)] * self.n
            idx[ax] = slice(0, width)
            mask[tuple(idx)] = True
            idx[ax] = slice(-width, None)
            mask[tuple(idx)] = True
        return mask


class FormField:
    """A (p, q)-form sampled on a grid; ``values[k]`` holds the coefficient of ``keys[k]``."""

    __slots__ = ("grid", "p", "q", "values")

    def __init__(self, grid: Grid, p: int, q: int, values):
        if p < 0 or q < 0:
            raise ValueError(f"negative bidegree ({p}, {q})")
        values = np.array(values, dtype=float)
        expected = (len(basis(grid.n, p, q)),) + grid.shape
        if values.shape != expected:
            raise ValueError(f"values have shape {values.shape}, expected {expected}")
        values.setflags(write=False)
        self.grid = grid
        self.p = p
        self.q = q
        self.values = values

    @classmethod
    def zeros(cls, grid: Grid, p: int, q: int) -> "FormField":
        return cls(grid, p, q, np.zeros((len(basis(grid.n, p, q)),) + grid.shape))

    @classmethod
    def from_functions(cls, grid: Grid, p: int, q: int,
                       funcs: Mapping[Key, Callable[..., np.ndarray]]) -> "FormField":
        """Sample ``funcs[key](x_1, ..., x_n)`` on the grid; missing keys are zero."""
        pos = basis_position(grid.n, p, q)
        vals = np.zeros((len(pos),) + grid.shape)
        mesh = grid.mesh()
        for key, f in funcs.items():
            vals[pos[key]] = np.broadcast_to(f(*mesh), grid.shape)
        return cls(grid, p, q, vals)

    @classmethod
    def from_point_form(cls, grid: Grid, a: PointForm, profile: np.ndarray | float = 1.0) -> "FormField":
        vec = np.array(a.to_vector(), dtype=float)
        prof = np.broadcast_to(np.asarray(profile, dtype=float), grid.shape)
        return cls(grid, a.p, a.q, vec.reshape((-1,) + (1,) * grid.n) * prof)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def keys(self) -> tuple[Key, ...]:
        return basis(self.n, self.p, self.q)

    @property
    def degree(self) -> int:
        return self.p + self.q

    def component(self, key: Key) -> np.ndarray:
        return self.values[basis_position(self.n, self.p, self.q)[key]]

    def at(self, index: Sequence[int]) -> PointForm:
        idx = (slice(None),) + tuple(index)
        return PointForm.from_vector(self.n, self.p, self.q, self.values[idx].tolist())

    def _like(self, values) -> "FormField":
        return FormField(self.grid, self.p, self.q, values)

    def _check(self, other: "FormField"):
        if not isinstance(other, FormField):
            raise TypeError(f"expected FormField, got {type(other).__name__}")
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
        if (other.p, other.q) != (self.p, self.q):
            raise ValueError(f"bidegree mismatch: ({self.p}, {self.q}) vs ({other.p}, {other.q})")

    def __add__(self, other):
        self._check(other)
        return self._like(self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return self._like(self.values - other.values)

    def __neg__(self):
        return self._like(-self.values)

    def __mul__(self, scalar):
        return self._like(self.values * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self._like(self.values / scalar)

    def scale_pointwise(self, f: np.ndarray) -> "FormField":
        return self._like(self.values * f)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def ravel(self) -> np.ndarray:
        return self.values.ravel()

    @classmethod
    def unravel(cls, grid: Grid, p: int, q: int, flat: np.ndarray) -> "FormField":
        return cls(grid, p, q, np.reshape(flat, (len(basis(grid.n, p, q)),) + grid.shape))

    def __repr__(self) -> str:
        return f"FormField(n={self.n}, p={self.p}, q={self.q}, shape={self.grid.shape})"


class WeightField:
    """Weight phi sampled with its gradient ``grad[i]`` and Hessian ``hess[..., i, j]``."""

    def __init__(self, grid: Grid, phi, grad, hess, convex: bool = False, name: str = "custom",
                 params: dict | None = None):
        n = grid.n
        phi = np.array(phi, dtype=float)
        grad = np.array(grad, dtype=float)
        hess = np.array(hess, dtype=float)
        if phi.shape != grid.shape or grad.shape != (n,) + grid.shape \
                or hess.shape != grid.shape + (n, n):
            raise ValueError("weight arrays do not match the grid")
        hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
        if convex:
            _require_spd(hess, "Hessian of a convex-flagged weight")
        for a in (phi, grad, hess):
            a.setflags(write=False)
        self.grid = grid
        self.phi = phi
        self.grad = grad
        self.hess = hess
        self.convex = convex
        self.name = name
        self.params = dict(params or {})

    @classmethod
    def zero(cls, grid: Grid) -> "WeightField":
        n = grid.n
        return cls(grid, np.zeros(grid.shape), np.zeros((n,) + grid.shape),
                   np.zeros(grid.shape + (n, n)), name="zero")

    def on_grid(self, grid: Grid) -> "WeightField":
        """Same samples attached to a grid of identical shape (e.g. another boundary flag)."""
        if grid.shape != self.grid.shape:
            raise ValueError("grid shapes differ")
        return WeightField(grid, self.phi, self.grad, self.hess, self.convex, self.name, self.params)

    def scaled(self, t: float) -> "WeightField":
        """The weight t * phi; convexity is kept for t > 0."""
        return WeightField(self.grid, t * self.phi, t * self.grad, t * self.hess,
                           convex=self.convex and t > 0, name=f"{t}*{self.name}",
                           params=self.params)


def _require_spd(G: np.ndarray, what: str):
    try:
        C = np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise ValueError(f"{what} is not positive definite at some grid point") from None
    if not np.all(np.diagonal(C, axis1=-2, axis2=-1) > 0):
        raise ValueError(f"{what} is not positive definite at some grid point")


class MetricField:
    """Positive (1,1)-form omega_ij(x); ``G`` is ``(n, n)`` when constant, else ``(*shape, n, n)``."""

    def __init__(self, grid: Grid, G):
        G = np.array(G, dtype=float)
        n = grid.n
        if G.shape not in ((n, n), grid.shape + (n, n)):
            raise ValueError(f"metric has shape {G.shape}, expected {(n, n)} or {grid.shape + (n, n)}")
        if not np.array_equal(G, np.swapaxes(G, -1, -2)):
            raise ValueError("metric is not symmetric")
        _require_spd(G, "metric")
        G.setflags(write=False)
        self.grid = grid
        self.G = G
        self._cache: dict = {}

    @classmethod
    def identity(cls, grid: Grid) -> "MetricField":
        return cls(grid, np.eye(grid.n))

    @classmethod
    def hessian(cls, w: WeightField) -> "MetricField":
        return cls(w.grid, w.hess)

    @classmethod
    def neg_hessian(cls, w: WeightField) -> "MetricField":
        return cls(w.grid, -w.hess)

    @property
    def constant(self) -> bool:
        return self.G.ndim == 2

    def _cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @cached_property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.G)

    @cached_property
    def det(self) -> np.ndarray:
        """det G broadcast to the grid shape."""
        return np.broadcast_to(np.linalg.det(self.G), self.grid.shape)

    def gram(self, p: int, q: int) -> np.ndarray:
        """Pointwise Gram matrix of coordinate (p, q)-monomials."""
        return self._cached(("gram", p, q), lambda: bidegree_transform(self.inverse, p, q))

    def gram_inv(self, p: int, q: int) -> np.ndarray:
        # compound matrices are multiplicative, so this inverts gram(p, q)
        return self._cached(("gram_inv", p, q), lambda: bidegree_transform(self.G, p, q))

    def lefschetz(self, p: int, q: int) -> np.ndarray:
        """Pointwise matrix of L from (p, q) to (p+1, q+1)."""
        return self._cached(("L", p, q), lambda: _lefschetz_stack(self.G, self.grid.n, p, q))

    def lam(self, p: int, q: int) -> np.ndarray:
        """Pointwise matrix of Lambda from (p, q) to (p-1, q-1)."""
        def build():
            Lt = np.swapaxes(self.lefschetz(p - 1, q - 1), -1, -2)
            return self.gram_inv(p - 1, q - 1) @ Lt @ self.gram(p, q)
        return self._cached(("Lambda", p, q), build)


@lru_cache(maxsize=None)
def _pair_wedges(n: int, p: int, q: int) -> np.ndarray:
    """Stack P[i, j] of matrices for dx_i ^ dxi_j ^ . on (p, q)-forms."""
    rows = len(basis(n, p + 1, q + 1))
    out = np.zeros((n, n, rows, len(basis(n, p, q))))
    if rows:
        for i in range(n):
            for j in range(n):
                out[i, j] = monomial_wedge_matrix(n, (1 << i, 1 << j), p, q)
    out.setflags(write=False)
    return out


def _lefschetz_stack(G: np.ndarray, n: int, p: int, q: int) -> np.ndarray:
    return np.einsum("...ij,ijab->...ab", G, _pair_wedges(n, p, q))


def apply_pointwise(M: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Apply per-point matrices ``M`` (``(K', K)`` or ``(*shape, K', K)``) to field values."""
    if M.ndim == 2:
        return np.tensordot(M, values, axes=1)
    return np.einsum("...ij,j...->i...", M, values)


def _pointwise(F: FormField, M: np.ndarray, p: int, q: int) -> FormField:
    if M.shape[-2] == 0 or M.shape[-1] == 0:
        return FormField.zeros(F.grid, p, q)
    return FormField(F.grid, p, q, apply_pointwise(M, F.values))


# ---------------------------------------------------------------- differences

def _shifted(f: np.ndarray, axis: int, step: int) -> np.ndarray:
    """f[j + step] along axis, zero where that index falls off the grid."""
    out = np.zeros_like(f)
    dst = [slice(None)] * f.ndim
    src = [slice(None)] * f.ndim
    dst[axis] = slice(0, -1) if step > 0 else slice(1, None)
    src[axis] = slice(1, None) if step > 0 else slice(0, -1)
    out[tuple(dst)] = f[tuple(src)]
    return out


def _last(ndim: int, axis: int) -> tuple:
    idx = [slice(None)] * ndim
    idx[axis] = -1
    return tuple(idx)


def forward_difference(f: np.ndarray, axis: int, h: float, boundary: str = "zero") -> np.ndarray:
    """(f[j+1] - f[j]) / h; past the end f is zero, periodic, or the last row is dropped."""
    if boundary == "periodic":
        return (np.roll(f, -1, axis=axis) - f) / h
    out = (_shifted(f, axis, 1) - f) / h
    if boundary == "free":
        out[_last(f.ndim, axis)] = 0.0
    return out


def forward_difference_transpose(g: np.ndarray, axis: int, h: float, boundary: str = "zero",
                                 ratio: np.ndarray | None = None) -> np.ndarray:
    """Transpose of forward_difference: (ratio[j] g[j-1] - g[j]) / h."""
    if boundary == "free":
        g = g.copy()
        g[_last(g.ndim, axis)] = 0.0
    prev = np.roll(g, 1, axis=axis) if boundary == "periodic" else _shifted(g, axis, -1)
    if ratio is not None:
        prev = prev * ratio
    return (prev - g) / h


@lru_cache(maxsize=None)
def _difference_terms(n: int, p: int, q: int, sharp: bool) -> tuple:
    """(axis, source index, target index, sign) for d (or d# when sharp)."""
    tp, tq = (p, q + 1) if sharp else (p + 1, q)
    pos = basis_position(n, tp, tq)
    terms = []
    for s, key in enumerate(basis(n, p, q)):
        for i in range(n):
            gen = (0, 1 << i) if sharp else (1 << i, 0)
            sign, target = monomial_product(gen, key)
            if sign:
                terms.append((i, s, pos[target], sign))
    return tuple(terms)


def _target(F: FormField, sharp: bool) -> tuple[int, int]:
    return (F.p, F.q + 1) if sharp else (F.p + 1, F.q)


def _apply_difference(F: FormField, sharp: bool) -> FormField:
    grid = F.grid
    tp, tq = _target(F, sharp)
    out = np.zeros((len(basis(grid.n, tp, tq)),) + grid.shape)
    h = grid.h
    for i, s, t, sign in _difference_terms(grid.n, F.p, F.q, sharp):
        D = forward_difference(F.values[s], i, h[i], grid.boundary)
        if sign > 0:
            out[t] += D
        else:
            out[t] -= D
    return FormField(grid, tp, tq, out)


def d(F: FormField) -> FormField:
    """Exterior derivative in x: sum_i D_i F_IJ dx_i ^ dx_I ^ dxi_J."""
    return _apply_difference(F, sharp=False)


def d_sharp(F: FormField) -> FormField:
    """sum_i D_i F_IJ dxi_i ^ dx_I ^ dxi_J."""
    return _apply_difference(F, sharp=True)


@lru_cache(maxsize=None)
def _one_form_wedges(n: int, p: int, q: int, sharp: bool) -> np.ndarray:
    rows = len(basis(n, p, q + 1) if sharp else basis(n, p + 1, q))
    out = np.zeros((n, rows, len(basis(n, p, q))))
    if rows:
        for i in range(n):
            key = (0, 1 << i) if sharp else (1 << i, 0)
            out[i] = monomial_wedge_matrix(n, key, p, q)
    out.setflags(write=False)
    return out


def _dsharp_phi_matrix(w: WeightField, p: int, q: int) -> np.ndarray:
    """Pointwise matrix of d#phi ^ . from (p, q) to (p, q+1)."""
    E = _one_form_wedges(w.grid.n, p, q, True)
    return np.einsum("i...,iab->...ab", w.grad, E)


def d_sharp_twisted(F: FormField, w: WeightField | None = None) -> FormField:
    """d#_phi F = d#F - d#phi ^ F, with d#phi = sum_i (d phi / dx_i) dxi_i."""
    out = d_sharp(F)
    if w is None:
        return out
    _same_grid(F, w)
    return out - _pointwise(F, _dsharp_phi_matrix(w, F.p, F.q), F.p, F.q + 1)


def lift_top(F: FormField) -> FormField:
    """(p, 0) -> (p, n): F ^ dxi_1 ^ ... ^ dxi_n.

    With omega = dd#phi the weighted norm of the lift is the Lebesgue-measure
    norm int |F|^2 e^{-phi} dx of F.
    """
    if F.q != 0:
        raise ValueError(f"lift_top needs a (p, 0)-field, got ({F.p}, {F.q})")
    return FormField(F.grid, F.p, F.n, F.values)


def drop_top(F: FormField) -> FormField:
    """Inverse of lift_top."""
    if F.q != F.n:
        raise ValueError(f"drop_top needs a (p, n)-field, got ({F.p}, {F.q})")
    return FormField(F.grid, F.p, 0, F.values)


def j_field(F: FormField) -> FormField:
    """J on every grid point: dx_I ^ dxi_J -> dxi_I ^ dx_J."""
    n = F.n
    pos = basis_position(n, F.q, F.p)
    out = np.zeros_like(F.values)
    for s, (I, J) in enumerate(F.keys):
        sign = j_sign((I, J))
        out[pos[(J, I)]] = F.values[s] if sign > 0 else -F.values[s]
    return FormField(F.grid, F.q, F.p, out)


def _same_grid(F: FormField, *others):
    for o in others:
        if o is not None and o.grid != F.grid:
            raise ValueError("field, weight and metric must share one grid")


# ------------------------------------------------------------ inner products

def pointwise_inner(A: FormField, B: FormField, g: MetricField) -> np.ndarray:
    A._check(B)
    GB = apply_pointwise(g.gram(A.p, A.q), B.values)
    return np.sum(A.values * GB, axis=0)


def volume_density(w: WeightField | None, g: MetricField) -> np.ndarray:
    """exp(-phi) det G prod(h) per cell."""
    dens = g.det * g.grid.cell_volume
    if w is not None:
        dens = dens * np.exp(-w.phi)
    return dens


def weighted_inner(A: FormField, B: FormField, w: WeightField | None, g: MetricField) -> float:
    """Discrete <A, B>_phi; pairwise summation over the flattened grid."""
    _same_grid(A, B, w, g)
    if A.values.shape[0] == 0:
        return 0.0
    integrand = pointwise_inner(A, B, g) * volume_density(w, g)
    return float(np.sum(integrand.ravel()))


def weighted_norm_sq(A: FormField, w: WeightField | None, g: MetricField) -> float:
    return weighted_inner(A, A, w, g)


def collar_mass(A: FormField, w: WeightField | None, g: MetricField, width: int = 2) -> float:
    """Fraction of the weighted mass of A sitting in the boundary collar."""
    dens = pointwise_inner(A, A, g) * volume_density(w, g)
    total = float(np.sum(dens.ravel()))
    if total == 0.0:
        return 0.0
    return float(np.sum(dens[A.grid.collar_mask(width)])) / total


# ------------------------------------------------------------------ adjoints

def _exp_ratios(w: WeightField | None, grid: Grid) -> list[np.ndarray | None]:
    """exp(phi[j] - phi[j - e_i]) per axis; the j = 0 entry is unused unless periodic."""
    if w is None:
        return [None] * grid.n
    out = []
    for ax in range(grid.n):
        prev = np.roll(w.phi, 1, axis=ax)
        out.append(np.exp(w.phi - prev))
    return out


def _difference_adjoint(B: FormField, w: WeightField | None, g: MetricField, sharp: bool) -> FormField:
    """Exact adjoint of d (or d#) from bidegree B.(p, q) down one step."""
    grid = B.grid
    p, q = (B.p, B.q - 1) if sharp else (B.p - 1, B.q)
    out_keys = len(basis(grid.n, p, q))
    det = g.det
    # with Q = det(G) * Gram * B the weight enters only through exp(phi[j] - phi[j-1])
    Q = apply_pointwise(g.gram(B.p, B.q), B.values)
    if not g.constant:
        Q = Q * det
    ratios = _exp_ratios(w, grid)
    T = np.zeros((out_keys,) + grid.shape)
    h = grid.h
    for i, s, t, sign in _difference_terms(grid.n, p, q, sharp):
        DT = forward_difference_transpose(Q[t], i, h[i], grid.boundary, ratios[i])
        if sign > 0:
            T[s] += DT
        else:
            T[s] -= DT
    if not g.constant:
        T = T / det
    return FormField(grid, p, q, apply_pointwise(g.gram_inv(p, q), T))


def _pointwise_adjoint(B: FormField, M: np.ndarray, g: MetricField, p: int, q: int) -> FormField:
    """Adjoint of the pointwise map with matrix M from (p, q) into B's bidegree."""
    Mt = np.swapaxes(M, -1, -2)
    return _pointwise(B, g.gram_inv(p, q) @ Mt @ g.gram(B.p, B.q), p, q)


def lambda_field(F: FormField, g: MetricField) -> FormField:
    """Pointwise Lambda from (p, q) to (p-1, q-1)."""
    if F.p == 0 or F.q == 0:
        raise ValueError(f"Lambda of a ({F.p}, {F.q})-form has no valid target bidegree")
    return _pointwise(F, g.lam(F.p, F.q), F.p - 1, F.q - 1)


def lefschetz_field(F: FormField, g: MetricField) -> FormField:
    return _pointwise(F, g.lefschetz(F.p, F.q), F.p + 1, F.q + 1)


def adjoint_d(B: FormField, w: WeightField | None, g: MetricField, mode: str = "exact") -> FormField:
    """Weighted adjoint d* from (p, q) to (p-1, q).

    ``exact`` is the transpose of the discrete d under weighted_inner;
    ``commutator`` evaluates Lambda d#_phi B - d#_phi Lambda B.
    """
    _same_grid(B, w, g)
    if B.p < 1:
        raise ValueError("d* needs p >= 1")
    if mode == "exact":
        return _difference_adjoint(B, w, g, sharp=False)
    if mode == "commutator":
        first = lambda_field(d_sharp_twisted(B, w), g)
        if B.q == 0:
            return first
        return first - d_sharp_twisted(lambda_field(B, g), w)
    raise ValueError(f"unknown adjoint mode {mode!r}")


def adjoint_d_sharp_twisted(B: FormField, w: WeightField | None, g: MetricField,
                            mode: str = "exact") -> FormField:
    """Weighted adjoint of d#_phi from (p, q) to (p, q-1)."""
    _same_grid(B, w, g)
    if B.q < 1:
        raise ValueError("(d#_phi)* needs q >= 1")
    if mode == "exact":
        out = _difference_adjoint(B, w, g, sharp=True)
        if w is not None:
            out = out - _pointwise_adjoint(B, _dsharp_phi_matrix(w, B.p, B.q - 1), g, B.p, B.q - 1)
        return out
    if mode == "commutator":
        first = lambda_field(d(B), g)
        if B.p == 0:
            return -first
        return -(first - d(lambda_field(B, g)))
    raise ValueError(f"unknown adjoint mode {mode!r}")


def box(F: FormField, w: WeightField | None, g: MetricField, flavor: str = "d") -> FormField:
    """Weighted Laplacian dd* + d*d (flavor 'd') or its d#_phi analogue (flavor 'dsharp')."""
    n = F.n
    if flavor == "d":
        out = FormField.zeros(F.grid, F.p, F.q)
        if F.p >= 1:
            out = out + d(adjoint_d(F, w, g))
        if F.p < n:
            out = out + adjoint_d(d(F), w, g)
        return out
    if flavor == "dsharp":
        out = FormField.zeros(F.grid, F.p, F.q)
        if F.q >= 1:
            out = out + d_sharp_twisted(adjoint_d_sharp_twisted(F, w, g), w)
        if F.q < n:
            out = out + adjoint_d_sharp_twisted(d_sharp_twisted(F, w), w, g)
        return out
    raise ValueError(f"unknown Laplacian flavor {flavor!r}")


def ddsharp_phi_matrix(w: WeightField, p: int, q: int) -> np.ndarray:
    """Pointwise matrix of dd#phi ^ . = sum_ij phi_ij dx_i ^ dxi_j ^ ."""
    return _lefschetz_stack(w.hess, w.grid.n, p, q)


def curvature_op(F: FormField, w: WeightField, g: MetricField) -> FormField:
    """[dd#phi, Lambda] F = dd#phi ^ Lambda F - Lambda(dd#phi ^ F), with the analytic Hessian."""
    _same_grid(F, w, g)
    n = F.n
    out = FormField.zeros(F.grid, F.p, F.q)
    if F.p >= 1 and F.q >= 1:
        out = out + _pointwise(lambda_field(F, g), ddsharp_phi_matrix(w, F.p - 1, F.q - 1), F.p, F.q)
    if F.p < n and F.q < n:
        up = _pointwise(F, ddsharp_phi_matrix(w, F.p, F.q), F.p + 1, F.q + 1)
        out = out - lambda_field(up, g)
    return out


@dataclass(frozen=True)
class BKNTerms:
    d_star: float
    d: float
    dsharp_star: float
    dsharp: float
    curvature: float
    collar_mass: float

    @property
    def lhs(self) -> float:
        return self.d_star + self.d

    @property
    def rhs(self) -> float:
        return self.dsharp_star + self.dsharp + self.curvature

    @property
    def residual(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs), np.finfo(float).eps)
        return abs(self.lhs - self.rhs) / scale


def bkn_terms(F: FormField, w: WeightField, g: MetricField) -> BKNTerms:
    """All terms of the integrated identity
    |d*F|^2 + |dF|^2 = |(d#_phi)*F|^2 + |d#_phi F|^2 + <[dd#phi, Lambda]F, F>.
    """
    n = F.n
    nsq = lambda A: weighted_norm_sq(A, w, g)  # noqa: E731
    return BKNTerms(
        d_star=nsq(adjoint_d(F, w, g)) if F.p >= 1 else 0.0,
        d=nsq(d(F)) if F.p < n else 0.0,
        dsharp_star=nsq(adjoint_d_sharp_twisted(F, w, g)) if F.q >= 1 else 0.0,
        dsharp=nsq(d_sharp_twisted(F, w)) if F.q < n else 0.0,
        curvature=weighted_inner(curvature_op(F, w, g), F, w, g),
        collar_mass=collar_mass(F, w, g),
    )


def bkn_residual(F: FormField, w: WeightField, g: MetricField) -> float:
    """Relative residual |LHS - RHS| / max(LHS, RHS, eps) of the integrated identity."""
    return bkn_terms(F, w, g).residual


def generalized_eigenvalues(w: WeightField, g: MetricField) -> np.ndarray:
    """Ascending eigenvalues of the Hessian of phi relative to G, per grid point."""
    C = np.linalg.cholesky(np.broadcast_to(g.G, w.grid.shape + (w.grid.n,) * 2))
    Ci = np.linalg.inv(C)
    S = Ci @ w.hess @ np.swapaxes(Ci, -1, -2)
    return np.linalg.eigvalsh(0.5 * (S + np.swapaxes(S, -1, -2)))


def curvature_lower_bound(w: WeightField, g: MetricField, p: int) -> float:
    """min over the grid of lambda_1 + ... + lambda_p (generalized eigenvalues, ascending)."""
    if not w.convex:
        raise ValueError("curvature lower bound requires a convex-flagged weight")
    if not 1 <= p <= w.grid.n:
        raise ValueError(f"p must be in 1..{w.grid.n}")
    lam = generalized_eigenvalues(w, g)
    return float(np.min(np.sum(lam[..., :p], axis=-1)))
