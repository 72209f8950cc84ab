"""
Turns residual series into per-check results and a run summary.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    max_residual: Optional[float]
    tolerance: float
    details: Dict[str, Any] = field(default_factory=dict)
    stamps: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "details": self.details,
            "stamps": self.stamps,
            "error": self.error,
        }


class ResidualEvaluationService:
    """Residual statistics and pass/fail decisions for verification checks"""

    def __init__(self):
        self.logger = logger

    @staticmethod
    def series_statistics(values: Iterable[Optional[float]]) -> Dict[str, Any]:
        """max, mean and count over the finite entries of a residual series"""
        finite = [float(v) for v in values if v is not None and math.isfinite(float(v))]
        if not finite:
            return {"max": None, "mean": None, "count": 0}
        return {"max": max(finite), "mean": float(np.mean(finite)), "count": len(finite)}

    def evaluate(
        self,
        name: str,
        residuals: Dict[str, Iterable[Optional[float]]],
        tolerance: float,
        bound: Optional[List[str]] = None,
        details: Optional[Dict[str, Any]] = None,
        stamps: Optional[Dict[str, Any]] = None,
    ) -> CheckResult:
        """
        Pass iff every bound series has at least one finite sample and its
        maximum is within tolerance

        Args:
            name: check name
            residuals: named residual series
            tolerance: bound on the maximum of each bound series
            bound: names of the series the verdict depends on (default: all)
            details: extra data merged into the result details
            stamps: convention stamps recorded with the result
        """
        statistics = {key: self.series_statistics(values) for key, values in residuals.items()}
        bound = list(residuals) if bound is None else bound
        maxima = [statistics[key]["max"] for key in bound if statistics[key]["max"] is not None]
        empty = [key for key in bound if statistics[key]["count"] == 0]
        max_residual = max(maxima) if maxima else None
        passed = not empty and max_residual is not None and max_residual <= tolerance
        result_details = {"series": statistics, "bound": bound}
        if empty:
            result_details["empty"] = empty
        result_details.update(details or {})
        result = CheckResult(
            name=name,
            passed=passed,
            max_residual=max_residual,
            tolerance=tolerance,
            details=result_details,
            stamps=stamps or {},
        )
        self.logger.info(
            f"{name}: {'passed' if passed else 'FAILED'} "
            f"(max residual {max_residual if max_residual is not None else 'n/a'}, tolerance {tolerance:g})"
        )
        return result

    def failed(self, name: str, tolerance: float, error: Exception) -> CheckResult:
        self.logger.error(f"Error in check {name}: {error}")
        return CheckResult(
            name=name,
            passed=False,
            max_residual=None,
            tolerance=tolerance,
            error=f"{type(error).__name__}: {error}",
        )

    def summarize(self, results: List[CheckResult]) -> Dict[str, Any]:
        failed = [r.name for r in results if not r.passed]
        errored = [r.name for r in results if r.error is not None]
        summary = {
            "checks": len(results),
            "passed": len(results) - len(failed),
            "failed": failed,
            "errored": errored,
            "all_passed": not failed,
        }
        self.logger.info(f"Run summary: {summary['passed']}/{summary['checks']} checks passed")
        return summary
