"""Verification reports: one record per checked identity."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

INVALID_MASKED_FRACTION = 0.5


@dataclass
class CheckResult:
    name: str
    anchor: str
    residual_linf: float
    residual_l2: float
    tolerance: float
    masked_fraction: float = 0.0
    detail: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        if self.masked_fraction > INVALID_MASKED_FRACTION:
            return "invalid"
        if not math.isfinite(self.residual_linf):
            return "fail"
        return "pass" if self.residual_linf <= self.tolerance else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["verdict"] = self.verdict
        return _clean(out)


@dataclass
class VerificationReport:
    suite: str
    scene: str
    provider: str
    checks: list = field(default_factory=list)
    dynamics: Optional[dict] = None
    extra: dict = field(default_factory=dict)

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        return check

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def masked_fraction(self) -> float:
        return max((c.masked_fraction for c in self.checks), default=0.0)

    def to_dict(self) -> dict:
        return _clean(
            {
                "suite": self.suite,
                "scene": self.scene,
                "provider": self.provider,
                "passed": self.passed,
                "checks": [c.to_dict() for c in self.checks],
                "dynamics": self.dynamics,
                "extra": self.extra,
            }
        )

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, **kw)

    def summary_lines(self) -> list:
        return [
            f"[{c.verdict.upper():7s}] {self.suite}:{c.name:32s} res={c.residual_linf:.3e} tol={c.tolerance:.1e}"
            f" masked={c.masked_fraction:.3f}"
            for c in self.checks
        ]


def _clean(obj):
    """JSON-safe copy: numpy scalars to floats, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        try:
            obj = obj.item()
        except (ValueError, AttributeError):
            pass
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj
