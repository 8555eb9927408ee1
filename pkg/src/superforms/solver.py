"""Minimal-norm solutions of d(alpha) = beta and of the weighted Laplace equation.

The d-equation is solved in normal-equations form: (d d*) u = beta by
Jacobi-preconditioned conjugate gradients, then alpha = d* u.  Since alpha lies
in the range of d* it is orthogonal to ker d, hence the minimal-norm solution.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .calculus import (
    FormField,
    MetricField,
    WeightField,
    adjoint_d,
    apply_pointwise,
    box,
    collar_mass,
    curvature_lower_bound,
    d,
    volume_density,
    weighted_norm_sq,
)

BOUND_KINDS = ("p-epsilon", "k-minus-n", "homogeneous", "concave", "none")


class SolverError(RuntimeError):
    """Raised for non-closed data, CG stagnation or an unusable bound."""


@dataclass(frozen=True)
class SolveConfig:
    tol: float = 1e-10
    maxiter: int = 20000
    flavor: str = "d-equation"
    bound_kind: str = "none"
    homogeneity: float | None = None
    stagnation_window: int = 50

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise ValueError(f"tol must lie in (0, 1), got {self.tol}")
        if self.maxiter < 1:
            raise ValueError("maxiter must be at least 1")
        if self.flavor not in ("d-equation", "box-equation"):
            raise ValueError(f"unknown flavor {self.flavor!r}")
        if self.bound_kind not in BOUND_KINDS:
            raise ValueError(f"bound_kind must be one of {BOUND_KINDS}")


@dataclass
class SolveReport:
    iterations: int
    residual: float
    norm_beta_sq: float
    norm_alpha_sq: float
    bound_constant: float | None = None
    bound_satisfied: bool | None = None
    slack: float = 1.0
    collar_mass: float = 0.0
    notes: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.norm_alpha_sq / self.norm_beta_sq if self.norm_beta_sq > 0 else 0.0

    def as_dict(self) -> dict:
        out = asdict(self)
        out["ratio"] = self.ratio
        return out


# ---------------------------------------------------------------- PCG core

def _weight_operator(g: MetricField, w: WeightField | None, p: int, q: int):
    """Apply the per-point Gram block times exp(-phi) det G h^n (the matrix W)."""
    gram = g.gram(p, q)
    dens = volume_density(w, g)

    def apply(values: np.ndarray) -> np.ndarray:
        return apply_pointwise(gram, values) * dens
    return apply


def _color_count(m: int, periodic: bool) -> int:
    return 3 if (not periodic or m % 3 == 0) else m


def probe_diagonal(apply_A: Callable[[np.ndarray], np.ndarray], shape: tuple[int, ...],
                   periodic: bool) -> np.ndarray:
    """Diagonal of a nearest-neighbour operator by coloured probing.

    Points whose indices agree modulo 3 along every axis never share a stencil,
    so one application per colour and per component recovers the diagonal.
    """
    K, grid_shape = shape[0], shape[1:]
    counts = [_color_count(m, periodic) for m in grid_shape]
    idx = np.indices(grid_shape)
    diag = np.zeros(shape)
    for comp in range(K):
        for color in np.ndindex(*counts):
            mask = np.ones(grid_shape, dtype=bool)
            for ax, c in enumerate(color):
                mask &= (idx[ax] % counts[ax]) == c
            if not mask.any():
                continue
            e = np.zeros(shape)
            e[comp][mask] = 1.0
            diag[comp][mask] = apply_A(e)[comp][mask]
    return diag


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float


def pcg(apply_A: Callable[[np.ndarray], np.ndarray], b: np.ndarray,
        apply_W: Callable[[np.ndarray], np.ndarray], diag: np.ndarray,
        tol: float, maxiter: int, window: int = 50) -> CGResult:
    """Jacobi-preconditioned CG for the Euclidean-symmetric system (W A) x = W b.

    ``apply_A`` is self-adjoint for <u, v>_W = u . W v.  The residual reported is
    |b - A x|_W / |b|_W.  That residual is not monotone in CG, so a plateau is
    detected on the energy x.WAx/2 - x.Wb, which CG decreases at every step:
    if ``window`` iterations lower it by less than 1e-14 of the total decrease
    so far, SolverError is raised.
    """
    bnorm = np.sqrt(float(np.sum(b * apply_W(b))))
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return CGResult(x, 0, 0.0)
    inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 0.0)
    r = b.copy()                      # b - A x
    rw = np.array(apply_W(r))         # Euclidean residual of the symmetric system; never aliases r
    z = inv_diag * rw
    p = z.copy()
    rz = float(np.sum(rw * z))
    energy = [0.0]                    # cumulative decrease of the CG energy
    res = 1.0
    for it in range(1, maxiter + 1):
        Ap = apply_A(p)
        WAp = apply_W(Ap)
        pAp = float(np.sum(p * WAp))
        if pAp <= 0:
            raise SolverError(f"operator not positive along search direction at iteration {it}")
        a = rz / pAp
        x += a * p
        r -= a * Ap
        rw -= a * WAp
        res = np.sqrt(max(float(np.sum(r * rw)), 0.0)) / bnorm
        if res <= tol:
            # confirm against a freshly computed residual
            r = b - apply_A(x)
            rw = np.array(apply_W(r))
            res = np.sqrt(max(float(np.sum(r * rw)), 0.0)) / bnorm
            if res <= tol:
                return CGResult(x, it, res)
        energy.append(energy[-1] + 0.5 * a * rz)
        if it > window and energy[-1] - energy[-1 - window] <= 1e-14 * energy[-1]:
            raise SolverError(f"CG stagnated at relative residual {res:.3e} after {it} iterations")
        z = inv_diag * rw
        rz_new = float(np.sum(rw * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG did not reach tol {tol:.1e} in {maxiter} iterations (residual {res:.3e})")


# ----------------------------------------------------------------- bounds

def _slack(grid) -> float:
    return 1.0 + 10.0 * float(np.max(grid.h)) * grid.diam


def _same_metric(g: MetricField, target: np.ndarray) -> bool:
    G = np.broadcast_to(g.G, target.shape)
    return bool(np.allclose(G, target, rtol=1e-12, atol=1e-12))


def bound_constant(beta: FormField, w: WeightField | None, g: MetricField, cfg: SolveConfig) -> float | None:
    """The constant C in |alpha|^2 <= C |beta|^2 for the configured bound kind."""
    n, p, k = beta.n, beta.p, beta.degree
    kind = cfg.bound_kind
    if kind == "none":
        return None
    if w is None:
        raise SolverError(f"bound {kind!r} needs a weight")
    if kind == "p-epsilon":
        if beta.q != n:
            raise SolverError("the p-epsilon bound applies to (p, n)-forms")
        eps_hat = curvature_lower_bound(w, g, p)
        if eps_hat <= 0:
            raise SolverError(f"certified curvature constant {eps_hat:.3e} is not positive")
        return 1.0 / eps_hat
    if kind == "k-minus-n":
        if not _same_metric(g, w.hess):
            raise SolverError("the k-minus-n bound needs the metric dd#phi")
        if k <= n:
            raise SolverError(f"the k-minus-n bound needs k > n, got k={k}")
        return 1.0 / (k - n)
    if kind == "concave":
        if not _same_metric(g, -w.hess):
            raise SolverError("the concave bound needs the metric -dd#phi")
        if k >= n:
            raise SolverError(f"the concave bound needs k < n, got k={k}")
        return 1.0 / (n - k)
    if kind == "homogeneous":
        r = cfg.homogeneity
        if r is None or r <= 1:
            raise SolverError("the homogeneous bound needs homogeneity r > 1")
        return 1.0 / (p * (r - 1))
    raise SolverError(f"unknown bound kind {kind!r}")


# ----------------------------------------------------------------- solves

def _check_closed(beta: FormField, tol: float) -> float:
    if beta.p >= beta.n:
        return 0.0
    db = d(beta)
    scale = max(beta.max_abs() * float(np.max(1.0 / beta.grid.h)), np.finfo(float).tiny)
    defect = db.max_abs() / scale
    if defect > tol:
        raise SolverError(f"beta is not closed: |d beta| / |beta| = {defect:.3e} > tol {tol:.1e}")
    return defect


def solve_d(beta: FormField, w: WeightField | None, g: MetricField,
            cfg: SolveConfig = SolveConfig()) -> tuple[FormField, SolveReport]:
    """Minimal-norm alpha with d(alpha) = beta in the weighted L2 space."""
    if beta.p < 1:
        raise SolverError("d(alpha) = beta needs beta of bidegree (p, q) with p >= 1")
    defect = _check_closed(beta, cfg.tol)
    C = bound_constant(beta, w, g, cfg)
    grid = beta.grid
    p, q = beta.p, beta.q

    def A(values):
        u = FormField(grid, p, q, values)
        return d(adjoint_d(u, w, g)).values

    W = _weight_operator(g, w, p, q)
    diag = probe_diagonal(lambda v: W(A(v)), beta.values.shape, grid.periodic)
    cg = pcg(A, beta.values.copy(), W, diag, cfg.tol, cfg.maxiter, cfg.stagnation_window)
    alpha = adjoint_d(FormField(grid, p, q, cg.x), w, g)
    report = verify_estimate(alpha, beta, w, g, C)
    report.iterations = cg.iterations
    report.notes["closedness_defect"] = defect
    report.notes["cg_residual"] = cg.residual
    return alpha, report


def verify_estimate(alpha: FormField, beta: FormField, w: WeightField | None, g: MetricField,
                    constant: float | None) -> SolveReport:
    """Recompute |d alpha - beta|, both norms and the bound from scratch."""
    if (alpha.p + 1, alpha.q) != (beta.p, beta.q) or alpha.grid != beta.grid:
        raise ValueError("alpha and beta shapes do not match d(alpha) = beta")
    nb = weighted_norm_sq(beta, w, g)
    na = weighted_norm_sq(alpha, w, g)
    res = np.sqrt(weighted_norm_sq(d(alpha) - beta, w, g) / nb) if nb > 0 else \
        np.sqrt(weighted_norm_sq(d(alpha), w, g))
    slack = _slack(beta.grid)
    ok = None if constant is None else bool(na <= constant * nb * slack)
    return SolveReport(iterations=0, residual=float(res), norm_beta_sq=nb, norm_alpha_sq=na,
                       bound_constant=constant, bound_satisfied=ok, slack=slack,
                       collar_mass=collar_mass(alpha, w, g) if na > 0 else 0.0)


def solve_box(beta: FormField, w: WeightField,
              cfg: SolveConfig = SolveConfig(flavor="box-equation"),
              boundary: str = "free") -> tuple[FormField, SolveReport]:
    """Solve box_phi alpha = beta for a closed k-form beta, k > n, with omega = dd#phi.

    By default the operator is assembled with free ends: on a zero-padded box the
    discrete Laplacian in degrees k > n has an eigenvalue of size ~exp(-max phi)
    carried by a boundary layer, which inflates alpha without bound.  With free
    ends that mode becomes an exact null vector orthogonal to compactly supported
    data.  The returned field lives on the caller's grid.
    """
    n, k = beta.n, beta.degree
    if k <= n:
        raise SolverError(f"the weighted Laplace solve needs k > n, got k={k}, n={n}")
    home = beta.grid
    grid = home.with_boundary(boundary or home.boundary)
    w = w.on_grid(grid)
    beta = FormField(grid, beta.p, beta.q, beta.values)
    g = MetricField.hessian(w)
    defect = _check_closed(beta, cfg.tol)
    p, q = beta.p, beta.q

    def A(values):
        return box(FormField(grid, p, q, values), w, g, "d").values

    W = _weight_operator(g, w, p, q)
    diag = probe_diagonal(lambda v: W(A(v)), beta.values.shape, grid.periodic)
    cg = pcg(A, beta.values.copy(), W, diag, cfg.tol, cfg.maxiter, cfg.stagnation_window)
    alpha = FormField(grid, p, q, cg.x)
    nb = weighted_norm_sq(beta, w, g)
    na = weighted_norm_sq(alpha, w, g)
    res = np.sqrt(weighted_norm_sq(box(alpha, w, g, "d") - beta, w, g) / nb) if nb > 0 else 0.0
    slack = _slack(grid)
    derived = 1.0 / (k - n) ** 2
    ratio = na / nb if nb > 0 else 0.0
    report = SolveReport(iterations=cg.iterations, residual=float(res), norm_beta_sq=nb,
                         norm_alpha_sq=na, bound_constant=derived,
                         bound_satisfied=bool(ratio <= derived * slack), slack=slack,
                         collar_mass=collar_mass(alpha, w, g) if na > 0 else 0.0)
    report.notes.update({
        "closedness_defect": defect,
        "constant_nominal": float((k - n) ** 2),
        "within_constant_nominal": bool(ratio <= (k - n) ** 2 * slack),
        "constant_derived": derived,
        "operator_boundary": grid.boundary,
    })
    return FormField(home, p, q, alpha.values), report
