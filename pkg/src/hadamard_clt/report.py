"""Check results and their JSON report."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one numerical check.

    ``passed`` records whether ``measured`` satisfied ``bound`` within
    ``tolerance``; the comparison direction is part of the check and is
    spelled out in ``context``.
    """

    name: str
    passed: bool
    measured: float
    bound: float
    tolerance: float
    context: str = ""
    skipped: bool = False

    def line(self) -> str:
        status = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        return (f"{status} {self.name}: measured={self.measured:.6g} bound={self.bound:.6g} "
                f"tol={self.tolerance:.3g} {self.context}").rstrip()


def at_most(name: str, measured: float, bound: float, tolerance: float = 0.0,
            context: str = "") -> CheckResult:
    ok = math.isfinite(measured) and measured <= bound + tolerance
    return CheckResult(name, bool(ok), float(measured), float(bound), float(tolerance),
                       ("measured <= bound + tol; " + context).rstrip("; "))


def at_least(name: str, measured: float, bound: float, tolerance: float = 0.0,
             context: str = "") -> CheckResult:
    ok = math.isfinite(measured) and measured >= bound - tolerance
    return CheckResult(name, bool(ok), float(measured), float(bound), float(tolerance),
                       ("measured >= bound - tol; " + context).rstrip("; "))


def close_to(name: str, measured: float, target: float, tolerance: float,
             context: str = "") -> CheckResult:
    ok = math.isfinite(measured) and abs(measured - target) <= tolerance
    return CheckResult(name, bool(ok), float(measured), float(target), float(tolerance),
                       ("|measured - bound| <= tol; " + context).rstrip("; "))


def skipped(name: str, reason: str) -> CheckResult:
    return CheckResult(name, True, math.nan, math.nan, 0.0, reason, skipped=True)


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def report_json(results, config: dict | None = None) -> str:
    """Deterministic JSON text for a list of results (non-finite numbers become null)."""
    items = [{k: _clean(v) for k, v in asdict(r).items()} for r in results]
    doc = {"config": config, "checks": items,
           "failed": sum(1 for r in results if not r.passed and not r.skipped)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def any_failed(results) -> bool:
    return any(not r.passed and not r.skipped for r in results)
