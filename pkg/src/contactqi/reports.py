"""Check reports shared by every verification routine."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

PASS = "pass"
FAIL = "fail"
NOT_APPLICABLE = "not-applicable"
INDETERMINATE = "indeterminate"

EXIT_CODES = {PASS: 0, FAIL: 1, NOT_APPLICABLE: 2, INDETERMINATE: 2}


@dataclass
class Hypothesis:
    name: str
    holds: bool
    detail: str = ""
    gating: bool = True

    def to_record(self) -> dict:
        return {"name": self.name, "holds": self.holds, "detail": self.detail, "gating": self.gating}


def _clean(value):
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item"):
        return _clean(value.item())
    return value


@dataclass
class CheckReport:
    """Outcome of one check.

    For sandwich checks the violations are ``max(lower - middle)`` and
    ``max(middle - upper)`` over all samples; ``conclusion`` is the outcome of
    the inequality alone, ``verdict`` additionally requires every gating
    hypothesis to hold. Residual-style checks leave the violations as ``None``
    and put their residuals in ``metrics``.
    """

    id: str
    verdict: str
    max_lower_violation: float | None = None
    max_upper_violation: float | None = None
    hypotheses: list[Hypothesis] = field(default_factory=list)
    samples: int = 0
    seed: int | None = None
    tol: float = 0.0
    conclusion: str | None = None
    metrics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    @property
    def hypotheses_hold(self) -> bool:
        return all(h.holds for h in self.hypotheses if h.gating)

    def to_record(self) -> dict:
        return _clean({
            "id": self.id,
            "verdict": self.verdict,
            "max_lower_violation": self.max_lower_violation,
            "max_upper_violation": self.max_upper_violation,
            "hypotheses": [h.to_record() for h in self.hypotheses],
            "samples": self.samples,
            "seed": self.seed,
            "tol": self.tol,
            "conclusion": self.conclusion,
            "metrics": self.metrics,
            "config": self.config,
        })


def residual_report(check_id: str, residual: float, tol: float, samples: int, **metrics) -> CheckReport:
    ok = residual <= tol
    return CheckReport(check_id, PASS if ok else FAIL, samples=samples, tol=tol,
                       conclusion=PASS if ok else FAIL,
                       metrics={"residual": float(residual), **metrics})


def sandwich_verdict(lower_violation: float, upper_violation: float, tol: float) -> str:
    ok = (lower_violation is None or lower_violation <= tol) and \
        (upper_violation is None or upper_violation <= tol)
    return PASS if ok else FAIL


def combined_exit_code(reports) -> int:
    verdicts = {r.verdict for r in reports}
    if FAIL in verdicts:
        return 1
    if verdicts & {NOT_APPLICABLE, INDETERMINATE}:
        return 2
    return 0
