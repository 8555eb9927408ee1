"""Structured run reports, written as JSON lines.

Schema (version 1), one object per line:

    {"record": "header", "schema": 1, "command": ..., "config": {...}}
    {"record": "check", "name": ..., "measured": ..., "expected": ...,
     "tolerance": ..., "status": "pass" | "fail" | "skipped", "reason": ..., "data": {...}}
    {"record": "summary", "pass": bool, "counts": {"pass": .., "fail": .., "skipped": ..}}
    {"record": "stamp", "wall_time": ..., "python": ..., "numpy": ..., "platform": ...}

Everything before the stamp line depends only on the configuration and seed.
Non-finite floats are written as the strings "nan", "inf" and "-inf".
"""
from __future__ import annotations

import json
import math
import platform
import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np

SCHEMA_VERSION = 1


def _clean(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(value, complex):
        return [_clean(value.real), _clean(value.imag)]
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    return value if value is None or isinstance(value, str) else str(value)


@dataclass
class Check:
    name: str
    measured: Any = None
    expected: Any = None
    tolerance: Any = None
    status: str = "pass"
    reason: str = ""
    data: dict = field(default_factory=dict)

    @classmethod
    def at_most(cls, name: str, measured: float, tolerance: float, expected: Any = 0.0, **data) -> "Check":
        ok = bool(np.isfinite(measured) and measured <= tolerance)
        return cls(name, measured, expected, tolerance, "pass" if ok else "fail", data=data)

    @classmethod
    def skipped(cls, name: str, reason: str) -> "Check":
        return cls(name, status="skipped", reason=reason)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def record(self) -> dict:
        return _clean({"record": "check", "name": self.name, "measured": self.measured,
                       "expected": self.expected, "tolerance": self.tolerance,
                       "status": self.status, "reason": self.reason, "data": self.data})


@dataclass
class Report:
    command: str
    config: dict
    checks: list[Check] = field(default_factory=list)
    wall_time: float = 0.0

    def add(self, *checks: Check) -> None:
        self.checks.extend(checks)

    @property
    def counts(self) -> dict[str, int]:
        out = {"pass": 0, "fail": 0, "skipped": 0}
        for c in self.checks:
            out[c.status] += 1
        return out

    @property
    def passed(self) -> bool:
        """True when no check failed; skipped checks are listed, not counted as failures."""
        return self.counts["fail"] == 0

    def body_lines(self) -> list[str]:
        recs = [{"record": "header", "schema": SCHEMA_VERSION, "command": self.command,
                 "config": _clean(self.config)}]
        recs += [c.record() for c in self.checks]
        recs.append({"record": "summary", "pass": self.passed, "counts": self.counts})
        return [json.dumps(r, sort_keys=True) for r in recs]

    def lines(self) -> list[str]:
        stamp = {"record": "stamp", "wall_time": round(self.wall_time, 6),
                 "python": platform.python_version(), "numpy": np.__version__,
                 "platform": sys.platform}
        return self.body_lines() + [json.dumps(stamp, sort_keys=True)]

    def dumps(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())


def load(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
