"""Pass/fail report shared by the testers, checkers and verifiers."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class ViolationReport:
    """``verdict == "fail"`` exactly when ``worst_margin > tolerance``."""

    worst_margin: float
    tolerance: float
    witnesses: list[dict[str, Any]] = field(default_factory=list)
    name: str = ""
    n_samples: int = 0
    n_violations: int = 0
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "fail" if self.worst_margin > self.tolerance else "pass"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict[str, Any]:
        d = {
            "verdict": self.verdict,
            "worst_margin": self.worst_margin,
            "tolerance": self.tolerance,
            "witnesses": self.witnesses,
        }
        if self.name:
            d["name"] = self.name
        if self.n_samples:
            d["n_samples"] = self.n_samples
            d["n_violations"] = self.n_violations
        if self.extra:
            d["extra"] = self.extra
        return _plain(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def merge_reports(name: str, reports: list[ViolationReport]) -> ViolationReport:
    """Combine sub-reports; the result fails if any part fails."""
    worst = max(reports, key=lambda r: r.worst_margin - r.tolerance)
    return ViolationReport(
        worst_margin=worst.worst_margin,
        tolerance=worst.tolerance,
        witnesses=[w for r in reports for w in r.witnesses if not r.passed][:10],
        name=name,
        n_samples=sum(r.n_samples for r in reports),
        n_violations=sum(r.n_violations for r in reports),
        extra={r.name: r.to_dict() for r in reports},
    )
