"""Seeded random forms and fields.

Every coefficient is drawn uniform in [-1, 1] from ``numpy.random.default_rng(seed)``
in basis order; fields are multiplied by the polynomial bump (1 - |x - c|^2 / R^2)^4
clamped at 0, so a given seed reproduces the same field in any implementation
that follows the same draw order.
"""
from __future__ import annotations

import numpy as np

from .calculus import FormField, Grid, d
from .exterior import PointForm, basis


def make_rng(seed: int | None) -> np.random.Generator:
    return np.random.default_rng(seed)


def bump(grid: Grid, center=None, radius: float = 1.0) -> np.ndarray:
    x = grid.points()
    c = np.zeros(grid.n) if center is None else np.broadcast_to(np.asarray(center, dtype=float), (grid.n,))
    s = np.sum((x - c) ** 2, axis=-1) / radius ** 2
    return np.where(s < 1.0, (1.0 - s) ** 4, 0.0)


def random_point_form(rng: np.random.Generator, n: int, p: int, q: int) -> PointForm:
    return PointForm.from_vector(n, p, q, rng.uniform(-1.0, 1.0, len(basis(n, p, q))))


def random_coefficients(rng: np.random.Generator, n: int, p: int, q: int, count: int) -> np.ndarray:
    """``count`` coefficient vectors, shape (count, dim), drawn row by row."""
    return rng.uniform(-1.0, 1.0, (count, len(basis(n, p, q))))


def random_field(rng: np.random.Generator, grid: Grid, p: int, q: int,
                 center=None, radius: float = 1.0) -> FormField:
    """Constant random coefficients times the bump profile."""
    vec = rng.uniform(-1.0, 1.0, len(basis(grid.n, p, q)))
    prof = bump(grid, center, radius)
    return FormField(grid, p, q, vec.reshape((-1,) + (1,) * grid.n) * prof)


def random_closed_field(rng: np.random.Generator, grid: Grid, p: int, q: int,
                        center=None, radius: float = 1.0) -> FormField:
    """d of a random (p-1, q) bump field; closed to round-off on the discrete complex."""
    if p < 1:
        raise ValueError("a closed field built as d(gamma) needs p >= 1")
    return d(random_field(rng, grid, p - 1, q, center, radius))
