"""Exact pointwise algebra of super forms.

Generators are ordered ``dx_1 < ... < dx_n < dxi_1 < ... < dxi_n``.  A
canonical monomial ``dx_I ^ dxi_J`` is stored as the key ``(I, J)`` where
``I`` and ``J`` are bit masks (bit ``i`` set means index ``i + 1`` is
present).  Every sign produced by reordering generators is folded into the
coefficient, so two forms are equal iff their coefficient maps are equal.

Coefficients may be any Python numbers (float, int, Fraction, complex); the
algebra itself only ever multiplies them by +-1.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from numbers import Number
from typing import Iterable, Iterator, Mapping

MAX_DIM = 16

Key = tuple[int, int]


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def mask_indices(mask: int) -> list[int]:
    """Zero-based positions of the set bits, ascending."""
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def indices_mask(indices: Iterable[int]) -> int:
    """Bit mask from zero-based positions."""
    m = 0
    for i in indices:
        if m >> i & 1:
            raise ValueError(f"repeated index {i + 1}")
        m |= 1 << i
    return m


def full_mask(n: int) -> int:
    return (1 << n) - 1


def merge_sign(a: int, b: int) -> int:
    """Sign of the permutation sorting the concatenation of ascending sets a, b.

    Counts pairs (i in a, j in b) with i > j.  The sets must be disjoint.
    """
    inversions = 0
    for j in mask_indices(b):
        inversions += popcount(a >> (j + 1))
    return -1 if inversions & 1 else 1


def monomial_product(k1: Key, k2: Key) -> tuple[int, Key]:
    """Product of two canonical monomials as ``(sign, key)``; sign 0 means zero."""
    i1, j1 = k1
    i2, j2 = k2
    if i1 & i2 or j1 & j2:
        return 0, (0, 0)
    # move dx_{I2} left across dxi_{J1}
    sign = -1 if (popcount(j1) * popcount(i2)) & 1 else 1
    sign *= merge_sign(i1, i2) * merge_sign(j1, j2)
    return sign, (i1 | i2, j1 | j2)


@lru_cache(maxsize=None)
def subsets(n: int, k: int) -> tuple[int, ...]:
    """All k-subsets of {1..n} as masks, ascending by mask value."""
    if k < 0 or k > n:
        return ()
    return tuple(sorted(indices_mask(c) for c in combinations(range(n), k)))


@lru_cache(maxsize=None)
def basis(n: int, p: int, q: int) -> tuple[Key, ...]:
    """Canonical monomial keys of bidegree (p, q), ordered by (I-mask, J-mask)."""
    return tuple((i, j) for i in subsets(n, p) for j in subsets(n, q))


@lru_cache(maxsize=None)
def basis_position(n: int, p: int, q: int) -> dict[Key, int]:
    return {k: pos for pos, k in enumerate(basis(n, p, q))}


class MultiIndex:
    """Ascending subset of {1, ..., n} packed as an n-bit mask."""

    __slots__ = ("bits", "n")

    def __init__(self, bits: int, n: int):
        if not 1 <= n <= MAX_DIM:
            raise ValueError(f"dimension must be in 1..{MAX_DIM}, got {n}")
        if bits < 0 or bits >> n:
            raise ValueError(f"mask {bits:#b} does not fit in {n} bits")
        self.bits = bits
        self.n = n

    @classmethod
    def of(cls, indices: Iterable[int], n: int) -> "MultiIndex":
        """Build from one-based indices, e.g. ``MultiIndex.of([1, 3], 4)``."""
        idx = list(indices)
        if any(not 1 <= i <= n for i in idx):
            raise ValueError(f"indices {idx} outside 1..{n}")
        return cls(indices_mask(i - 1 for i in idx), n)

    def __iter__(self) -> Iterator[int]:
        return (i + 1 for i in mask_indices(self.bits))

    def __len__(self) -> int:
        return popcount(self.bits)

    def __contains__(self, i: int) -> bool:
        return 1 <= i <= self.n and bool(self.bits >> (i - 1) & 1)

    def complement(self) -> "MultiIndex":
        return MultiIndex(full_mask(self.n) ^ self.bits, self.n)

    def __or__(self, other: "MultiIndex") -> "MultiIndex":
        return MultiIndex(self.bits | other.bits, self.n)

    def __and__(self, other: "MultiIndex") -> "MultiIndex":
        return MultiIndex(self.bits & other.bits, self.n)

    def __sub__(self, other: "MultiIndex") -> "MultiIndex":
        return MultiIndex(self.bits & ~other.bits, self.n)

    def __eq__(self, other) -> bool:
        return isinstance(other, MultiIndex) and (self.bits, self.n) == (other.bits, other.n)

    def __hash__(self) -> int:
        return hash((self.bits, self.n))

    def __repr__(self) -> str:
        return f"MultiIndex({list(self)}, n={self.n})"


def _as_mask(index, n: int) -> int:
    if isinstance(index, MultiIndex):
        if index.n != n:
            raise ValueError("multi-index dimension mismatch")
        return index.bits
    if isinstance(index, int):
        return index
    return indices_mask(i - 1 for i in index)


class GradedForm:
    """Element of the exterior algebra at a point, possibly of mixed degree."""

    def __init__(self, n: int, coeffs: Mapping[Key, Number] | None = None):
        if not 1 <= n <= MAX_DIM:
            raise ValueError(f"dimension must be in 1..{MAX_DIM}, got {n}")
        self.n = n
        top = full_mask(n)
        clean = {}
        for (i, j), c in (coeffs or {}).items():
            if i & ~top or j & ~top:
                raise ValueError(f"key {(i, j)} exceeds dimension {n}")
            if c != 0:
                clean[(i, j)] = c
        self._coeffs = clean

    @property
    def coeffs(self) -> dict[Key, Number]:
        return dict(self._coeffs)

    def items(self):
        return self._coeffs.items()

    def __getitem__(self, key: Key):
        return self._coeffs.get(key, 0)

    def __len__(self) -> int:
        return len(self._coeffs)

    def is_zero(self) -> bool:
        return not self._coeffs

    def bidegrees(self) -> set[tuple[int, int]]:
        return {(popcount(i), popcount(j)) for i, j in self._coeffs}

    def parts(self) -> dict[tuple[int, int], "PointForm"]:
        """Split into homogeneous components keyed by bidegree."""
        out: dict[tuple[int, int], dict] = {}
        for (i, j), c in self._coeffs.items():
            out.setdefault((popcount(i), popcount(j)), {})[(i, j)] = c
        return {pq: PointForm(self.n, pq[0], pq[1], cs) for pq, cs in sorted(out.items())}

    def degree_part(self, k: int) -> "GradedForm":
        return GradedForm(self.n, {key: c for key, c in self._coeffs.items()
                                   if popcount(key[0]) + popcount(key[1]) == k})

    def _check(self, other: "GradedForm"):
        if not isinstance(other, GradedForm):
            raise TypeError(f"expected a form, got {type(other).__name__}")
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")

    def _combine(self, coeffs: dict) -> "GradedForm":
        return GradedForm(self.n, coeffs)

    def __add__(self, other):
        self._check(other)
        out = dict(self._coeffs)
        for k, c in other.items():
            out[k] = out.get(k, 0) + c
        if isinstance(self, PointForm) and isinstance(other, PointForm) \
                and (self.p, self.q) == (other.p, other.q):
            return self._combine(out)
        return GradedForm(self.n, out)

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, GradedForm):
            return NotImplemented
        return self._combine({k: c * scalar for k, c in self._coeffs.items()})

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self._combine({k: c / scalar for k, c in self._coeffs.items()})

    def __xor__(self, other):
        return wedge(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GradedForm):
            return NotImplemented
        return self.n == other.n and self._coeffs == other._coeffs

    def __hash__(self):
        return hash((self.n, frozenset(self._coeffs.items())))

    def max_abs(self) -> float:
        return max((abs(c) for c in self._coeffs.values()), default=0.0)

    def map_coeffs(self, fn) -> "GradedForm":
        return self._combine({k: fn(c) for k, c in self._coeffs.items()})

    def __repr__(self) -> str:
        if not self._coeffs:
            return f"{type(self).__name__}(0, n={self.n})"
        terms = " + ".join(f"{c!r}*{monomial_name(k, self.n)}" for k, c in sorted(self._coeffs.items()))
        return f"{type(self).__name__}({terms}, n={self.n})"


class PointForm(GradedForm):
    """Homogeneous super form of bidegree (p, q) at a point."""

    def __init__(self, n: int, p: int, q: int, coeffs: Mapping[Key, Number] | None = None):
        if not (0 <= p <= n and 0 <= q <= n):
            raise ValueError(f"bidegree ({p}, {q}) impossible for n={n}")
        super().__init__(n, coeffs)
        for i, j in self._coeffs:
            if popcount(i) != p or popcount(j) != q:
                raise ValueError(f"key {(i, j)} does not have bidegree ({p}, {q})")
        self.p = p
        self.q = q

    @property
    def degree(self) -> int:
        return self.p + self.q

    def _combine(self, coeffs):
        return PointForm(self.n, self.p, self.q, coeffs)

    def to_vector(self):
        """Coefficients in the ``basis(n, p, q)`` order, as a list."""
        return [self._coeffs.get(k, 0) for k in basis(self.n, self.p, self.q)]

    @classmethod
    def from_vector(cls, n: int, p: int, q: int, values) -> "PointForm":
        return cls(n, p, q, dict(zip(basis(n, p, q), values)))


def monomial_name(key: Key, n: int) -> str:
    i, j = key
    parts = [f"dx{a + 1}" for a in mask_indices(i)] + [f"dxi{a + 1}" for a in mask_indices(j)]
    return "^".join(parts) if parts else "1"


def wedge(a: GradedForm, b: GradedForm) -> GradedForm:
    """Exterior product; homogeneous inputs give a PointForm."""
    if not isinstance(a, GradedForm) or not isinstance(b, GradedForm):
        raise TypeError("wedge expects two forms")
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n}")
    out: dict[Key, Number] = {}
    for k1, c1 in a.items():
        for k2, c2 in b.items():
            s, k = monomial_product(k1, k2)
            if s:
                out[k] = out.get(k, 0) + s * c1 * c2
    if isinstance(a, PointForm) and isinstance(b, PointForm):
        p, q = a.p + b.p, a.q + b.q
        if p > a.n or q > a.n:
            return GradedForm(a.n)
        return PointForm(a.n, p, q, out)
    return GradedForm(a.n, out)


def j_sign(key: Key) -> int:
    """Sign s with J(dx_I ^ dxi_J) = s * dx_J ^ dxi_I."""
    i, j = key
    # dxi_I ^ dx_J = (-1)^{|I||J|} dx_J ^ dxi_I
    return -1 if (popcount(i) * popcount(j)) & 1 else 1


def j_map(a: GradedForm) -> GradedForm:
    """The involution J swapping the dx and dxi families."""
    out = {(j, i): j_sign((i, j)) * c for (i, j), c in a.items()}
    if isinstance(a, PointForm):
        return PointForm(a.n, a.q, a.p, out)
    return GradedForm(a.n, out)


def monomial(n: int, I=(), J=(), coeff=1) -> PointForm:
    """``coeff * dx_I ^ dxi_J`` from one-based index lists (in the given order).

    The indices are wedged in the order supplied, so ``monomial(2, [2, 1])``
    equals ``-dx_1 ^ dx_2``.
    """
    form = PointForm(n, 0, 0, {(0, 0): coeff})
    for i in I:
        form = wedge(form, dx(n, i))
    for j in J:
        form = wedge(form, dxi(n, j))
    return form


def dx(n: int, i: int) -> PointForm:
    if not 1 <= i <= n:
        raise ValueError(f"index {i} outside 1..{n}")
    return PointForm(n, 1, 0, {(1 << (i - 1), 0): 1})


def dxi(n: int, i: int) -> PointForm:
    if not 1 <= i <= n:
        raise ValueError(f"index {i} outside 1..{n}")
    return PointForm(n, 0, 1, {(0, 1 << (i - 1)): 1})


def dV(n: int, i: int) -> PointForm:
    return wedge(dx(n, i), dxi(n, i))


def one(n: int, coeff=1) -> PointForm:
    return PointForm(n, 0, 0, {(0, 0): coeff})


def theta(I, J, K, n: int) -> PointForm:
    """``Theta_{I,J,K} = dx_J ^ dxi_K ^ dV_I`` for pairwise disjoint I, J, K.

    Index sets may be MultiIndex objects, masks, or iterables of one-based
    indices.
    """
    mi, mj, mk = (_as_mask(x, n) for x in (I, J, K))
    if mi & mj or mi & mk or mj & mk:
        raise ValueError("theta requires pairwise disjoint index sets")
    form = PointForm(n, popcount(mj), popcount(mk), {(mj, mk): 1})
    for i in mask_indices(mi):
        form = wedge(form, dV(n, i + 1))
    return form


def theta_sign(I: int, J: int, K: int) -> int:
    """Canonical coefficient of Theta_{I,J,K} (masks); theta = sign * dx_{J|I} ^ dxi_{K|I}."""
    s = 1
    key = (J, K)
    for i in mask_indices(I):
        t, key = monomial_product(key, (1 << i, 1 << i))
        s *= t
    return s


def theta_coordinates(a: GradedForm) -> dict[tuple[int, int, int], Number]:
    """Rewrite a form in the Theta basis: returns {(I, J, K): coefficient}.

    The diagonal part of the monomial dx_A ^ dxi_B is I = A & B.
    """
    out = {}
    for (a_mask, b_mask), c in a.items():
        diag = a_mask & b_mask
        J, K = a_mask & ~diag, b_mask & ~diag
        out[(diag, J, K)] = c * theta_sign(diag, J, K)
    return out


def from_theta_coordinates(n: int, coords: Mapping[tuple[int, int, int], Number]) -> GradedForm:
    out: dict[Key, Number] = {}
    for (I, J, K), c in coords.items():
        key = (J | I, K | I)
        out[key] = out.get(key, 0) + c * theta_sign(I, J, K)
    return GradedForm(n, out)


def homogeneous(a: GradedForm, p: int, q: int) -> PointForm:
    """View ``a`` as a PointForm of bidegree (p, q); other components must vanish."""
    extra = a.bidegrees() - {(p, q)}
    if extra:
        raise ValueError(f"form has components of bidegree {sorted(extra)}")
    return PointForm(a.n, p, q, a.coeffs)
