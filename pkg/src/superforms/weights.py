"""Closed-form weight catalog: quadratic(A), power(r, c) = c|x|^r, and tabulated custom weights."""
from __future__ import annotations

import re

import numpy as np

from .calculus import Grid, WeightField


def _is_spd(H: np.ndarray) -> bool:
    try:
        C = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return False
    return bool(np.all(np.diagonal(C, axis1=-2, axis2=-1) > 0))


def quadratic(grid: Grid, A=None) -> WeightField:
    """phi = x.A.x / 2 (A defaults to the identity; a scalar means a multiple of it)."""
    n = grid.n
    A = np.eye(n) if A is None else np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = float(A) * np.eye(n)
    A = 0.5 * (A + A.T)
    x = grid.points()
    Ax = x @ A.T
    phi = 0.5 * np.sum(x * Ax, axis=-1)
    grad = np.moveaxis(Ax, -1, 0)
    hess = np.broadcast_to(A, grid.shape + (n, n))
    return WeightField(grid, phi, grad, hess, convex=_is_spd(A), name="quadratic",
                       params={"A": A.tolist()})


def power(grid: Grid, r: float, c: float = 1.0) -> WeightField:
    """phi = c |x|^r, an r-homogeneous weight."""
    if r <= 1:
        raise ValueError(f"power weight needs r > 1, got {r}")
    n = grid.n
    x = grid.points()
    rho = np.linalg.norm(x, axis=-1)
    safe = np.where(rho > 0, rho, 1.0)
    phi = c * rho ** r
    grad = np.moveaxis(c * r * (safe ** (r - 2))[..., None] * x, -1, 0)
    u = x / safe[..., None]
    outer = u[..., :, None] * u[..., None, :]
    hess = c * r * (safe ** (r - 2))[..., None, None] * (np.eye(n) + (r - 2) * outer)
    if np.any(rho == 0):
        hess[rho == 0] = (2 * c * np.eye(n)) if r == 2 else 0.0
        grad[:, rho == 0] = 0.0
    convex = c > 0 and _is_spd(hess)
    return WeightField(grid, phi, grad, hess, convex=convex, name="power",
                       params={"r": r, "c": c})


def custom(grid: Grid, values) -> WeightField:
    """Tabulated weight; gradient and Hessian by second-order finite differences
    (one-sided at the boundary, so accuracy drops to first order there)."""
    phi = np.asarray(values, dtype=float).reshape(grid.shape)
    h = grid.h
    n = grid.n
    grad = np.stack(np.gradient(phi, *h, edge_order=2)) if n > 1 \
        else np.gradient(phi, h[0], edge_order=2)[None]
    hess = np.empty(grid.shape + (n, n))
    for i in range(n):
        gi = np.gradient(grad[i], *h, edge_order=2)
        gi = gi if n > 1 else [gi]
        for j in range(n):
            hess[..., i, j] = gi[j]
    hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
    return WeightField(grid, phi, grad, hess, convex=_is_spd(hess), name="custom")


def power_conjugate(r: float, c: float = 1.0) -> tuple[float, float]:
    """(s, c*) with (c|x|^r)* = c*|y|^s and 1/r + 1/s = 1."""
    s = r / (r - 1)
    return s, (r - 1) / r * (c * r) ** (-1.0 / (r - 1))


def add(a: WeightField, b: WeightField) -> WeightField:
    """Pointwise sum of two weights on one grid."""
    if a.grid != b.grid:
        raise ValueError("weights live on different grids")
    hess = a.hess + b.hess
    return WeightField(a.grid, a.phi + b.phi, a.grad + b.grad, hess, convex=_is_spd(hess),
                       name=f"{a.name}+{b.name}", params={"terms": [a.params, b.params]})


_SPEC = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_weight(spec: str, grid: Grid) -> WeightField:
    """Build a weight from ``quadratic``, ``quadratic(a)``, ``quartic``, ``power(r, c)``,
    ``concave``, ``custom(file)`` or ``zero``; terms joined by ``+`` are summed."""
    if "+" in spec:
        terms = [parse_weight(t, grid) for t in _split_terms(spec)]
        out = terms[0]
        for t in terms[1:]:
            out = add(out, t)
        return out
    match = _SPEC.match(spec)
    if not match:
        raise ValueError(f"cannot parse weight spec {spec!r}")
    name, args = match.group(1), match.group(2)
    args = [a.strip() for a in args.split(",")] if args else []
    if name == "quadratic":
        return quadratic(grid, float(args[0]) if args else None)
    if name == "quartic":
        return power(grid, 4.0, float(args[0]) if args else 0.25)
    if name == "power":
        if not args:
            raise ValueError("power weight needs r")
        return power(grid, float(args[0]), float(args[1]) if len(args) > 1 else 1.0)
    if name == "concave":
        return quadratic(grid, -(float(args[0]) if args else 1.0))
    if name == "custom":
        if len(args) != 1:
            raise ValueError("custom weight needs a file name")
        return custom(grid, np.loadtxt(args[0]))
    if name == "zero":
        return WeightField.zero(grid)
    raise ValueError(f"unknown weight {name!r}")


def _split_terms(spec: str) -> list[str]:
    """Split on '+' outside parentheses."""
    out, depth, cur = [], 0, ""
    for ch in spec:
        depth += ch == "("
        depth -= ch == ")"
        if ch == "+" and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    return out + [cur]
