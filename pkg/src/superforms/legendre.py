"""Legendre transforms, gradient maps and pullbacks of super forms.

For an r-homogeneous convex weight phi the gradient map of phi* carries the
weighted problem on x-space to a Lebesgue-measure problem on the dual space,
where the (p, 0) <-> (p, n) reduction gives a clean constant.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .calculus import (
    FormField,
    Grid,
    MetricField,
    WeightField,
    apply_pointwise,
    d,
    drop_top,
    lift_top,
    collar_mass,
    pointwise_inner,
    weighted_norm_sq,
)
from .metric import bidegree_transform
from .solver import SolveConfig, SolveReport, SolverError, _slack, solve_d
from .weights import power, power_conjugate, quadratic

CHUNK = 1 << 22   # entries of the (dual x primal) score matrix per block
DUAL_TOL = 1e-8   # the x-space correction absorbs what the dual stage leaves


@dataclass
class ConvexField:
    """Sampled convex function with gradient; ``homogeneity`` r if phi(t y) = t^r phi(y)."""

    grid: Grid
    values: np.ndarray
    grad: np.ndarray
    hess: np.ndarray | None = None
    homogeneity: float | None = None
    name: str = "custom"
    boundary_flags: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.grad = np.asarray(self.grad, dtype=float)
        if self.values.shape != self.grid.shape or self.grad.shape != (self.grid.n,) + self.grid.shape:
            raise ValueError("values and gradient must match the grid")

    @classmethod
    def from_weight(cls, w: WeightField, homogeneity: float | None = None) -> "ConvexField":
        if homogeneity is None and w.name == "power":
            homogeneity = float(w.params["r"])
        if homogeneity is None and w.name == "quadratic":
            homogeneity = 2.0
        return cls(w.grid, w.phi, w.grad, w.hess, homogeneity, w.name)

    @property
    def flagged(self) -> bool:
        """True if some supremum was attained on the primal boundary."""
        return bool(self.boundary_flags is not None and self.boundary_flags.any())

    def convexity_defect(self) -> float:
        """Most negative second difference along any axis (0 if discretely convex)."""
        worst = 0.0
        for ax in range(self.grid.n):
            dd = np.diff(self.values, n=2, axis=ax)
            if dd.size:
                worst = min(worst, float(dd.min()))
        return -worst

    def is_convex(self, tol: float = 1e-10) -> bool:
        return self.convexity_defect() <= tol * max(1.0, float(np.max(np.abs(self.values))))

    def euler_residual(self) -> float:
        """max |y . grad f(y) - r f(y)| / max(1, max |r f|)."""
        if self.homogeneity is None:
            raise ValueError("no homogeneity degree set")
        y = np.moveaxis(self.grid.points(), -1, 0)
        res = np.sum(y * self.grad, axis=0) - self.homogeneity * self.values
        return float(np.max(np.abs(res)) / max(1.0, np.max(np.abs(self.homogeneity * self.values))))

    def as_weight(self) -> WeightField:
        if self.hess is None:
            raise ValueError("field has no Hessian")
        return WeightField(self.grid, self.values, self.grad, self.hess, convex=True, name=self.name)


def _on_boundary(grid: Grid) -> np.ndarray:
    return grid.collar_mask(1)


def legendre_transform(f: ConvexField, dual_grid: Grid) -> ConvexField:
    """f*(y) = max over primal grid points x of x.y - f(x), by exhaustive search.

    The gradient of the result is the maximizing x.  Dual points whose maximizer
    sits on the primal boundary are recorded in ``boundary_flags``.
    """
    if dual_grid.n != f.grid.n:
        raise ValueError("dual grid dimension differs")
    if not np.all(np.isfinite(f.values)):
        raise ValueError("f must be finite on its grid")
    X = f.grid.points().reshape(-1, f.grid.n)
    fx = f.values.ravel()
    edge = _on_boundary(f.grid).ravel()
    Y = dual_grid.points().reshape(-1, dual_grid.n)
    vals = np.empty(len(Y))
    arg = np.empty(len(Y), dtype=np.int64)
    step = max(1, CHUNK // len(X))
    for s in range(0, len(Y), step):
        score = Y[s:s + step] @ X.T - fx
        arg[s:s + step] = np.argmax(score, axis=1)
        vals[s:s + step] = score[np.arange(len(score)), arg[s:s + step]]
    grad = np.moveaxis(X[arg].reshape(dual_grid.shape + (f.grid.n,)), -1, 0)
    r = f.homogeneity
    dual_r = None if r is None else r / (r - 1)
    return ConvexField(dual_grid, vals.reshape(dual_grid.shape), grad, None, dual_r,
                       name=f"({f.name})*", boundary_flags=edge[arg].reshape(dual_grid.shape))


def conjugate_weight(w: WeightField, dual_grid: Grid) -> WeightField:
    """phi* sampled on ``dual_grid``; closed form for catalog weights, else exhaustive search
    with finite-difference derivatives."""
    if w.name == "quadratic":
        A = np.array(w.params["A"], dtype=float)
        return quadratic(dual_grid, np.linalg.inv(A))
    if w.name == "power":
        s, cs = power_conjugate(float(w.params["r"]), float(w.params["c"]))
        return power(dual_grid, s, cs)
    from .weights import custom
    fs = legendre_transform(ConvexField.from_weight(w), dual_grid)
    if fs.flagged:
        raise SolverError("Legendre supremum attained on the primal boundary; enlarge the primal grid")
    return custom(dual_grid, fs.values)


def dual_grid_for(w: WeightField, m=None, pad: float = 0.1) -> Grid:
    """Box covering the range of grad phi over the primal grid, widened by ``pad`` per side.

    When that range already fits in the primal box (and no resolution is forced)
    the primal grid itself is returned, so a self-dual weight maps nodes to nodes.
    """
    g = w.grid
    lo = w.grad.reshape(g.n, -1).min(axis=1)
    hi = w.grad.reshape(g.n, -1).max(axis=1)
    if m is None and np.all(lo >= np.array(g.lo) - 1e-12) and np.all(hi <= np.array(g.hi) + 1e-12):
        return g
    span = hi - lo
    span = np.where(span > 0, span, 1.0)
    return Grid(tuple(lo - pad * span), tuple(hi + pad * span), g.m if m is None else m, g.boundary)


# ------------------------------------------------------------------ gradient maps

@dataclass
class GradientMap:
    """psi on ``grid`` with images psi(x) (shape (n, *shape)) and Jacobians D psi (shape (*shape, n, n))."""

    grid: Grid
    images: np.ndarray
    jacobian: np.ndarray

    def __post_init__(self):
        n = self.grid.n
        if self.images.shape != (n,) + self.grid.shape or self.jacobian.shape != self.grid.shape + (n, n):
            raise ValueError("images and Jacobians must match the grid")

    @classmethod
    def of_weight(cls, w: WeightField) -> "GradientMap":
        """psi = grad phi, D psi = Hess phi."""
        return cls(w.grid, np.array(w.grad), np.array(w.hess))

    @classmethod
    def identity(cls, grid: Grid) -> "GradientMap":
        n = grid.n
        return cls(grid, np.moveaxis(grid.points(), -1, 0), np.broadcast_to(np.eye(n), grid.shape + (n, n)).copy())

    @classmethod
    def linear(cls, grid: Grid, M) -> "GradientMap":
        """psi(x) = M x."""
        M = np.asarray(M, dtype=float)
        x = grid.points()
        return cls(grid, np.moveaxis(x @ M.T, -1, 0), np.broadcast_to(M, grid.shape + M.shape).copy())

    def is_spd(self) -> bool:
        J = 0.5 * (self.jacobian + np.swapaxes(self.jacobian, -1, -2))
        try:
            np.linalg.cholesky(J)
        except np.linalg.LinAlgError:
            return False
        return True

    def det(self) -> np.ndarray:
        return np.linalg.det(self.jacobian)


def _sample(F: FormField, points: np.ndarray, outside: str) -> np.ndarray:
    """Multilinear interpolation of every component of F at ``points`` (shape (n, *S)).

    The field is padded with one ghost node of zeros per side, matching the
    zero continuation used by the difference operators.
    """
    grid = F.grid
    n = grid.n
    axes = []
    for a, lo, hi, h in zip(grid.axes(), grid.lo, grid.hi, grid.h):
        axes.append(np.concatenate([[a[0] - h], a, [a[-1] + h]]))
    pad = [(0, 0)] + [(1, 1)] * n
    data = np.moveaxis(np.pad(F.values, pad), 0, -1)
    pts = np.moveaxis(points, 0, -1).reshape(-1, n)
    lo = np.array([ax[0] for ax in axes])
    hi = np.array([ax[-1] for ax in axes])
    bad = np.any((pts < lo) | (pts > hi), axis=1)
    if bad.any() and outside == "error":
        shown = ", ".join(str(tuple(np.round(p, 6))) for p in pts[bad][:8])
        raise ValueError(f"{int(bad.sum())} image points escape the field's grid, e.g. {shown}")
    interp = RegularGridInterpolator(tuple(axes), data, method="linear", bounds_error=False, fill_value=0.0)
    vals = interp(pts)
    return np.moveaxis(vals.reshape(points.shape[1:] + (F.values.shape[0],)), -1, 0)


def pullback(psi: GradientMap, F: FormField, outside: str = "error") -> FormField:
    """psi* F on psi's grid: coefficients composed with psi, dx and dxi slots both by D psi^T.

    ``outside="zero"`` treats F as zero beyond its grid (for compactly supported
    data); the default raises when an image point leaves the grid.
    """
    if psi.grid.n != F.grid.n:
        raise ValueError("dimension mismatch")
    vals = _sample(F, psi.images, outside)
    T = bidegree_transform(np.swapaxes(psi.jacobian, -1, -2), F.p, F.q)
    return FormField(psi.grid, F.p, F.q, apply_pointwise(T, vals))


def compose(outer: GradientMap, inner: GradientMap) -> GradientMap:
    """(outer o inner) on inner's grid, with the chain rule for Jacobians (interpolated)."""
    n = inner.grid.n
    images = np.stack([_sample(FormField(outer.grid, 0, 0, outer.images[i][None]), inner.images, "error")[0]
                       for i in range(n)])
    J = np.empty(inner.grid.shape + (n, n))
    for i in range(n):
        for j in range(n):
            J[..., i, j] = _sample(FormField(outer.grid, 0, 0, outer.jacobian[..., i, j][None]),
                                   inner.images, "error")[0]
    return GradientMap(inner.grid, images, J @ inner.jacobian)


# ------------------------------------------------------------------ integral identities

@dataclass
class HomogeneousCheck:
    lhs: float
    rhs: float
    deviation: float
    euler_residual: float
    dual_euler_residual: float
    change_of_variables: float
    dual_grid: Grid
    notes: dict = field(default_factory=dict)


def homogeneous_check(phi: WeightField, alpha: FormField, r: float | None = None,
                      dual_grid: Grid | None = None, euler_tol: float = 1e-10) -> HomogeneousCheck:
    """Compare int |alpha|^2_{omega^phi} e^{-phi} dx with
    int |psi* alpha|^2_{omega^{phi*}} e^{-phi*/(r-1)} omega_n^{phi*} for psi = grad phi*.

    Both sides are midpoint sums on their own grids; alpha is a (p, 0)-field.
    Also returns the relative change-of-variables defect for the (n, n)-integrand
    |alpha|^2 e^{-phi} dx ^ dxi.
    """
    if alpha.q != 0:
        raise ValueError("homogeneous_check takes (p, 0)-fields")
    f = ConvexField.from_weight(phi, r)
    if f.homogeneity is None or f.homogeneity <= 1:
        raise ValueError("need a homogeneity degree r > 1")
    r = f.homogeneity
    euler = f.euler_residual()
    if euler > euler_tol:
        raise ValueError(f"Euler residual {euler:.3e} exceeds {euler_tol:.1e}: weight is not {r}-homogeneous")
    dual = dual_grid or dual_grid_for(phi)
    star = conjugate_weight(phi, dual)
    dual_euler = ConvexField.from_weight(star, r / (r - 1)).euler_residual()

    g = MetricField.hessian(phi)
    lhs = weighted_norm_sq(lift_top(alpha), phi, g)          # Lebesgue measure on x-space
    psi = GradientMap.of_weight(star)
    beta = pullback(psi, alpha, outside="zero")
    rhs = weighted_norm_sq(beta, star.scaled(1.0 / (r - 1)), MetricField.hessian(star))

    # change of variables for the (n, n)-form a0 c_n dx ^ dxi with a0 = |alpha|^2 e^{-phi}
    a0 = pointwise_inner(alpha, alpha, g) * np.exp(-phi.phi)
    a0_field = FormField(alpha.grid, 0, 0, a0[None])
    pulled = _sample(a0_field, psi.images, "zero")[0]
    direct = float(np.sum(a0)) * alpha.grid.cell_volume
    moved = float(np.sum(pulled * psi.det())) * dual.cell_volume
    cov = abs(moved - direct) / max(abs(direct), np.finfo(float).tiny)
    dev = abs(lhs - rhs) / max(abs(lhs), np.finfo(float).tiny)
    return HomogeneousCheck(lhs, rhs, dev, euler, dual_euler, cov, dual)


# ------------------------------------------------------------------ homogeneous solve

def solve_homogeneous(beta: FormField, phi: WeightField, cfg: SolveConfig = SolveConfig(),
                      r: float | None = None, dual_grid: Grid | None = None,
                      correct: bool = True) -> tuple[FormField, SolveReport]:
    """Solve d(alpha) = beta for a closed (p, 0)-field under an r-homogeneous weight.

    Norm: int |.|^2_{omega^phi} e^{-phi} omega_n^phi.  Stages: pull beta back to the
    dual space by grad phi*; solve there for weight phi*/(r-1) with metric
    dd# of that weight through the (p, n) lift; push the answer forward to
    x-space with grad phi; finally remove the interpolation defect with a
    minimal-norm correction solve on x-space.
    """
    if beta.q != 0 or beta.p < 1:
        raise SolverError("solve_homogeneous takes a (p, 0)-field with p >= 1")
    f = ConvexField.from_weight(phi, r)
    r = f.homogeneity
    if r is None or r <= 1:
        raise SolverError("need a homogeneity degree r > 1")
    n, p = beta.n, beta.p
    g = MetricField.hessian(phi)
    nb = weighted_norm_sq(beta, phi, g)
    nominal, derived = 1.0 / (p * (r - 1)), (r - 1) / p
    slack = _slack(beta.grid)
    notes = {"constant_nominal": nominal, "constant_derived": derived,
             "tau_nominal": (r - 1) ** (1 - r), "dual_weight_scale": 1.0 / (r - 1)}
    if nb == 0.0:
        alpha = FormField.zeros(beta.grid, p - 1, 0)
        return alpha, SolveReport(0, 0.0, 0.0, 0.0, nominal, True, slack, 0.0, notes)

    try:
        dual = dual_grid or dual_grid_for(phi)
        star = conjugate_weight(phi, dual)
        theta = star.scaled(1.0 / (r - 1))
        gamma = pullback(GradientMap.of_weight(star), beta, outside="zero")
    except Exception as exc:
        raise SolverError(f"[dual transfer] {exc}") from exc
    try:
        # the interpolated gamma is closed only up to interpolation error: project it first
        eta_top, rep_dual = solve_d(_closed_part(lift_top(gamma), theta), theta,
                                    MetricField.hessian(theta),
                                    SolveConfig(tol=max(cfg.tol, DUAL_TOL), maxiter=cfg.maxiter,
                                                bound_kind="k-minus-n"))
    except SolverError as exc:
        raise SolverError(f"[dual solve] {exc}") from exc
    try:
        alpha = pullback(GradientMap.of_weight(phi), drop_top(eta_top), outside="error")
    except Exception as exc:
        raise SolverError(f"[push forward] {exc}") from exc
    notes["dual_iterations"] = rep_dual.iterations
    notes["dual_ratio"] = rep_dual.ratio
    notes["transfer_defect"] = float(np.sqrt(weighted_norm_sq(d(alpha) - beta, phi, g) / nb))
    iterations = rep_dual.iterations
    if correct and notes["transfer_defect"] > cfg.tol:
        try:
            # relative target for the defect so that the total residual lands at cfg.tol
            rel = min(0.5, cfg.tol / notes["transfer_defect"])
            fix, rep_fix = solve_d(beta - d(alpha), phi, g, SolveConfig(tol=rel, maxiter=cfg.maxiter))
        except SolverError as exc:
            raise SolverError(f"[correction] {exc}") from exc
        na_before = weighted_norm_sq(alpha, phi, g)
        alpha = alpha + fix
        notes["correction_fraction"] = float(np.sqrt(weighted_norm_sq(fix, phi, g) / max(na_before, 1e-300)))
        iterations += rep_fix.iterations
    na = weighted_norm_sq(alpha, phi, g)
    res = float(np.sqrt(weighted_norm_sq(d(alpha) - beta, phi, g) / nb))
    ratio = na / nb
    notes["within_constant_derived"] = bool(ratio <= derived * slack)
    report = SolveReport(iterations=iterations, residual=res, norm_beta_sq=nb, norm_alpha_sq=na,
                         bound_constant=nominal, bound_satisfied=bool(ratio <= nominal * slack),
                         slack=slack, notes=notes)
    report.collar_mass = collar_mass(alpha, phi, g)
    return alpha, report


def _closed_part(F: FormField, w: WeightField) -> FormField:
    """Orthogonal projection of F onto ker d in the weighted norm.

    The complement of ker d is the range of d*, and its component u is the
    minimal-norm solution of d u = d F.
    """
    dF = d(F)
    if dF.max_abs() == 0.0:
        return F
    u, _ = solve_d(dF, w, MetricField.hessian(w), SolveConfig(tol=0.1 * DUAL_TOL))
    return F - u
