"""Command-line driver.

    superforms verify-algebra --n 4 --trials 200 --seed 7
    superforms bkn --n 1 --weight quadratic --grid 256
    superforms solve --n 2 --p 1 --q 2 --weight quadratic --bound p-epsilon

Settings come from built-in defaults, then a ``--config`` file of ``key = value``
lines, then command-line flags.  The report is written as JSON lines to ``--out``
(stdout when omitted).  Exit status: 0 when every check passes, 1 when a check
fails, 2 for an invalid configuration.
"""
from __future__ import annotations

import argparse
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import sff, suites
from .calculus import Grid
from .report import Check, Report
from .sampling import make_rng, random_closed_field, random_field
from .solver import BOUND_KINDS, SolveConfig, SolverError, solve_box, solve_d
from .weights import parse_weight

COMMANDS = ("verify-algebra", "verify-bridge", "bkn", "solve", "solve-box", "legendre", "convergence")
METRICS = ("identity", "hessian-of-weight", "neg-hessian-of-weight")
TARGETS = ("bkn", "example", "solve")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = ""
    n: int = 2
    grid: str = "32"
    box: str = "-3,3"
    boundary: str = "zero"
    weight: str = "quadratic"
    metric: str = "identity"
    p: int = 1
    q: int | None = None
    bound: str = "none"
    seed: int = 0
    trials: int = 100
    tol: float = 1e-10
    maxiter: int = 20000
    radius: float = 1.5
    target: str = "bkn"
    beta: str | None = None
    alpha_out: str | None = None
    out: str | None = None

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")
        if not 1 <= self.n <= 6:
            raise ConfigError(f"n must lie in 1..6, got {self.n}")
        if self.metric not in METRICS:
            raise ConfigError(f"unknown metric {self.metric!r}; choose from {', '.join(METRICS)}")
        if self.bound not in BOUND_KINDS:
            raise ConfigError(f"unknown bound {self.bound!r}; choose from {', '.join(BOUND_KINDS)}")
        if self.target not in TARGETS:
            raise ConfigError(f"unknown convergence target {self.target!r}; choose from {', '.join(TARGETS)}")
        if self.boundary not in ("zero", "periodic", "free"):
            raise ConfigError(f"unknown boundary {self.boundary!r}")
        if not 0 <= self.p <= self.n or not 0 <= self.degree_q <= self.n:
            raise ConfigError(f"bidegree ({self.p}, {self.degree_q}) out of range for n={self.n}")
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        if not 0 < self.tol < 1:
            raise ConfigError(f"tol must lie in (0, 1), got {self.tol}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        self.grid_shape
        self.bounds

    @property
    def degree_q(self) -> int:
        return self.n if self.q is None else self.q

    @property
    def grid_shape(self) -> tuple[int, ...]:
        try:
            m = tuple(int(t) for t in str(self.grid).split(","))
        except ValueError as exc:
            raise ConfigError(f"grid must be an integer or a comma list, got {self.grid!r}") from exc
        if len(m) == 1:
            m = m * self.n
        if len(m) != self.n or min(m) < 2:
            raise ConfigError(f"grid {self.grid!r} does not give {self.n} sizes >= 2")
        return m

    @property
    def bounds(self) -> tuple[float, float]:
        try:
            lo, hi = (float(t) for t in str(self.box).split(","))
        except ValueError as exc:
            raise ConfigError(f"box must be 'lo,hi', got {self.box!r}") from exc
        if not lo < hi:
            raise ConfigError(f"empty box {self.box!r}")
        return lo, hi

    def make_grid(self, factor: int = 1) -> Grid:
        lo, hi = self.bounds
        m = tuple(k * factor for k in self.grid_shape)
        return Grid((lo,) * self.n, (hi,) * self.n, m, self.boundary)

    def echo(self) -> dict:
        out = asdict(self)
        out.pop("out")
        return out


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value: str):
    kind = _TYPES[key]
    if value.lower() in ("none", "") and "None" in kind:
        return None
    try:
        if kind.startswith("int"):
            return int(value)
        if kind.startswith("float"):
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot read {value!r} as {kind.split()[0]}") from exc
    return value


def read_config_file(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="superforms", description="Super-form calculus checks and solves.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="key = value file; flags given here override it")
    ap.add_argument("--n", type=int)
    ap.add_argument("--grid", help="points per axis, e.g. 64 or 64,32")
    ap.add_argument("--box", help="lo,hi for every axis; write --box=-4,4 when lo is negative")
    ap.add_argument("--boundary", choices=("zero", "periodic", "free"))
    ap.add_argument("--weight", help="e.g. quadratic, quartic, power(4,0.25), quadratic+quartic, custom(file)")
    ap.add_argument("--metric", choices=METRICS)
    ap.add_argument("--p", type=int)
    ap.add_argument("--q", type=int)
    ap.add_argument("--bound", choices=BOUND_KINDS)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--trials", type=int)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--maxiter", type=int)
    ap.add_argument("--radius", type=float, help="bump radius of random data")
    ap.add_argument("--target", choices=TARGETS, help="what the convergence command refines")
    ap.add_argument("--beta", help="SFF1 file with the right-hand side")
    ap.add_argument("--alpha-out", dest="alpha_out", help="write the solution as SFF1")
    ap.add_argument("--out", help="report path (JSON lines)")
    return ap


def resolve(argv=None) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    path = args.pop("config")
    merged = read_config_file(path) if path else {}
    merged.update({k: v for k, v in args.items() if v is not None})
    cfg = RunConfig(**merged)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------- commands

def _weight(cfg: RunConfig, grid: Grid):
    try:
        return parse_weight(cfg.weight, grid)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"weight {cfg.weight!r}: {exc}") from exc


def _beta(cfg: RunConfig, grid: Grid, rng, closed: bool = True):
    if cfg.beta:
        try:
            F = sff.read(cfg.beta)
        except (OSError, sff.SFFError) as exc:
            raise ConfigError(f"cannot read beta: {exc}") from exc
        return F
    p, q = cfg.p, cfg.degree_q
    if closed and p + q < 2 * cfg.n and p >= 1 and p < cfg.n:
        return random_closed_field(rng, grid, p, q, radius=cfg.radius)
    return random_field(rng, grid, p, q, radius=cfg.radius)


def _solve_check(name: str, rep, tol: float) -> Check:
    ok = rep.residual <= max(10 * tol, 1e-8) and rep.bound_satisfied is not False
    data = rep.as_dict()
    return Check(name, rep.ratio, None if rep.bound_constant is None else rep.bound_constant * rep.slack,
                 rep.slack, "pass" if ok else "fail", data=data)


def _solve_once(cfg: RunConfig, grid: Grid, rng):
    from .legendre import solve_homogeneous
    w = _weight(cfg, grid)
    beta = _beta(cfg, grid, rng)
    if cfg.beta:
        grid, w = beta.grid, _weight(cfg, beta.grid)
    scfg = SolveConfig(tol=cfg.tol, maxiter=cfg.maxiter, bound_kind=cfg.bound)
    if cfg.bound == "homogeneous":
        if cfg.metric != "hessian-of-weight":
            raise ConfigError("the homogeneous bound is stated for --metric hessian-of-weight")
        return solve_homogeneous(beta, w, scfg)
    try:
        g = suites.metric_field(cfg.metric, w)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return solve_d(beta, w, g, scfg)


def cmd_verify_algebra(cfg: RunConfig) -> list[Check]:
    checks = suites.algebra_suite(cfg.n, cfg.trials, cfg.seed)
    checks += suites.primitive_suite(cfg.n, min(cfg.trials, 20), cfg.seed)
    return checks


def cmd_verify_bridge(cfg: RunConfig) -> list[Check]:
    return suites.bridge_suite(cfg.n, cfg.trials, cfg.seed)


def cmd_bkn(cfg: RunConfig) -> list[Check]:
    m = cfg.grid_shape[0]
    checks = suites.bkn_checks(cfg.n, cfg.weight, (m, 2 * m), cfg.seed, cfg.metric)
    if cfg.n == 1:
        checks += suites.example_1d_checks((m, 2 * m, 4 * m))
    else:
        checks.append(Check.skipped("example-1d", "the one-variable example pair needs n = 1"))
    return checks


def cmd_solve(cfg: RunConfig) -> list[Check]:
    alpha, rep = _solve_once(cfg, cfg.make_grid(), make_rng(cfg.seed))
    if cfg.alpha_out:
        sff.write(cfg.alpha_out, alpha)
    checks = [_solve_check(f"solve-({cfg.p},{cfg.degree_q})", rep, cfg.tol)]
    if cfg.bound == "none":
        checks.append(Check.skipped("bound", "no bound kind requested"))
    return checks


def cmd_solve_box(cfg: RunConfig) -> list[Check]:
    grid = cfg.make_grid()
    beta = _beta(cfg, grid, make_rng(cfg.seed))
    w = _weight(cfg, beta.grid)
    alpha, rep = solve_box(beta, w, SolveConfig(tol=cfg.tol, maxiter=cfg.maxiter, flavor="box-equation"),
                           boundary="free" if cfg.boundary == "zero" else cfg.boundary)
    if cfg.alpha_out:
        sff.write(cfg.alpha_out, alpha)
    return [_solve_check(f"solve-box-({beta.p},{beta.q})", rep, cfg.tol)]


def cmd_legendre(cfg: RunConfig) -> list[Check]:
    from .legendre import ConvexField, conjugate_weight
    checks = suites.legendre_checks(cfg.seed)
    grid = cfg.make_grid()
    w = _weight(cfg, grid)
    f = ConvexField.from_weight(w)
    checks.append(Check.at_most(f"convexity-defect {cfg.weight}", f.convexity_defect(), 1e-10))
    if f.homogeneity is None:
        checks.append(Check.skipped(f"euler-residual {cfg.weight}", "weight is not homogeneous"))
    else:
        checks.append(Check.at_most(f"euler-residual {cfg.weight}", f.euler_residual(), 1e-10,
                                    r=f.homogeneity))
    try:
        star = conjugate_weight(w, grid)
        checks.append(Check(f"conjugate {cfg.weight}", float(np.max(star.phi)), status="pass",
                            data={"name": star.name}))
    except SolverError as exc:
        checks.append(Check(f"conjugate {cfg.weight}", status="fail", reason=str(exc)))
    return checks


def cmd_convergence(cfg: RunConfig) -> list[Check]:
    m = cfg.grid_shape[0]
    ms = (m, 2 * m, 4 * m)
    if cfg.target == "example":
        return suites.example_1d_checks(ms)
    if cfg.target == "bkn":
        checks = []
        for p in range(cfg.n + 1):
            for q in range(cfg.n + 1):
                res = suites.bkn_study(cfg.n, cfg.weight, ms, p, q, cfg.seed, metric=cfg.metric)
                orders = suites.observed_orders(res)
                ok = min(orders) >= 0.5
                checks.append(Check(f"bkn-order-({p},{q})", orders, ">= 0.5", 0.5, "pass" if ok else "fail",
                                    data={"grids": list(ms), "residuals": res}))
        return checks
    # solve: the ratio |alpha|^2 / |beta|^2 should settle as h -> 0
    ratios = []
    for factor in (1, 2, 4):
        _, rep = _solve_once(cfg, cfg.make_grid(factor), make_rng(cfg.seed))
        if rep.residual > max(10 * cfg.tol, 1e-8):
            return [Check("solve-convergence", status="fail", reason=f"solve at {m * factor} did not converge")]
        ratios.append(rep.ratio)
    diffs = [abs(ratios[0] - ratios[1]), abs(ratios[1] - ratios[2])]
    orders = suites.observed_orders(diffs)
    ok = diffs[1] <= diffs[0] or diffs[1] <= 1e-8
    return [Check("solve-convergence", orders, "differences shrink", None, "pass" if ok else "fail",
                  data={"grids": list(ms), "ratios": ratios, "differences": diffs})]


DISPATCH = {
    "verify-algebra": cmd_verify_algebra,
    "verify-bridge": cmd_verify_bridge,
    "bkn": cmd_bkn,
    "solve": cmd_solve,
    "solve-box": cmd_solve_box,
    "legendre": cmd_legendre,
    "convergence": cmd_convergence,
}


def run(cfg: RunConfig) -> Report:
    report = Report(cfg.command, cfg.echo())
    t0 = time.perf_counter()
    try:
        report.add(*DISPATCH[cfg.command](cfg))
    except SolverError as exc:
        report.add(Check(cfg.command, status="fail", reason=str(exc)))
    report.wall_time = time.perf_counter() - t0
    return report


def main(argv=None) -> int:
    try:
        cfg = resolve(argv)
        report = run(cfg)
    except SystemExit as exc:           # argparse usage errors already exit with 2
        return int(exc.code or 0)
    except (ConfigError, ValueError) as exc:
        print(f"superforms: invalid configuration: {exc}", file=sys.stderr)
        return 2
    if cfg.out:
        report.write(cfg.out)
    else:
        sys.stdout.write(report.dumps())
    c = report.counts
    print(f"superforms {cfg.command}: {c['pass']} passed, {c['fail']} failed, {c['skipped']} skipped",
          file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
