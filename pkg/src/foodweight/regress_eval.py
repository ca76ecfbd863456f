"""Regression metric suite and the per-class weight-error breakdown.

Signed weight error follows the actual-minus-predicted convention
(over-prediction shows up negative).  The per-class TOTAL row is the
sample-weighted mean over all samples, not the mean of class means.
"""

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import (
    ConstantActuals,
    DimensionMismatch,
    EmptyDataset,
    EmptyInput,
    ZeroActual,
)


def _check_pair(actual: Sequence[float], predicted: Sequence[float]) -> int:
    if len(actual) != len(predicted):
        raise DimensionMismatch(
            f"length mismatch: {len(actual)} actual vs {len(predicted)} predicted"
        )
    if len(actual) == 0:
        raise EmptyInput("metric needs at least one sample")
    return len(actual)


def mse(actual: Sequence[float], predicted: Sequence[float]) -> float:
    """Mean squared error in grams^2."""
    n = _check_pair(actual, predicted)
    acc = 0.0
    for a, p in zip(actual, predicted):
        d = a - p
        acc += d * d
    return acc / n


def rmse(actual: Sequence[float], predicted: Sequence[float]) -> float:
    """Root mean squared error in grams."""
    return math.sqrt(mse(actual, predicted))


def mae(actual: Sequence[float], predicted: Sequence[float]) -> float:
    """Mean absolute error in grams."""
    n = _check_pair(actual, predicted)
    acc = 0.0
    for a, p in zip(actual, predicted):
        acc += abs(a - p)
    return acc / n


def mape(actual: Sequence[float], predicted: Sequence[float]) -> float:
    """Mean absolute percentage error, in percent."""
    n = _check_pair(actual, predicted)
    acc = 0.0
    for a, p in zip(actual, predicted):
        if a == 0.0:
            raise ZeroActual("percentage error undefined for actual value 0")
        acc += abs((a - p) / a)
    return acc / n * 100.0


def r_squared(actual: Sequence[float], predicted: Sequence[float]) -> float:
    """Coefficient of determination: 1 - SS_res / SS_tot.

    Can be negative for models worse than predicting the mean.
    """
    n = _check_pair(actual, predicted)
    if n < 2:
        raise EmptyInput("r_squared needs at least two samples")
    mean_actual = sum(actual) / n
    ss_res = 0.0
    ss_tot = 0.0
    for a, p in zip(actual, predicted):
        d = a - p
        ss_res += d * d
        t = a - mean_actual
        ss_tot += t * t
    if ss_tot == 0.0:
        raise ConstantActuals("r_squared undefined when all actual values are equal")
    return 1.0 - ss_res / ss_tot


@dataclass
class RegressionReport:
    mse: float
    rmse: float
    mae: float
    mape: float
    r_squared: float

    def __post_init__(self):
        if self.mse < 0.0 or self.mae < 0.0:
            raise ValueError("mse and mae must be non-negative")
        if abs(self.rmse * self.rmse - self.mse) > 1e-12 * max(1.0, self.mse):
            raise ValueError(f"rmse {self.rmse} is not sqrt of mse {self.mse}")
        if self.r_squared > 1.0:
            raise ValueError(f"r_squared cannot exceed 1: {self.r_squared}")

    def to_json_dict(self) -> dict:
        return {
            "mse": self.mse,
            "rmse": self.rmse,
            "mae": self.mae,
            "mape_percent": self.mape,
            "r_squared": self.r_squared,
        }


def evaluate_regression(
    actual: Sequence[float], predicted: Sequence[float]
) -> RegressionReport:
    """All five metrics over one actual/predicted pair of vectors."""
    return RegressionReport(
        mse=mse(actual, predicted),
        rmse=rmse(actual, predicted),
        mae=mae(actual, predicted),
        mape=mape(actual, predicted),
        r_squared=r_squared(actual, predicted),
    )


@dataclass(frozen=True)
class WeightSample:
    """One evaluated prediction: true class, weights in grams, and the
    detection confidence that produced it."""

    label: str
    actual: float
    predicted: float
    confidence: float


@dataclass
class PerClassRow:
    label: str
    count: int
    avg_confidence: float
    avg_actual: float
    avg_predicted: float
    avg_error: float
    avg_abs_error: float

    def __post_init__(self):
        # mean |e| bounds |mean e| for any sample set
        if abs(self.avg_error) > self.avg_abs_error + 1e-9:
            raise ValueError(
                f"row {self.label!r}: |avg error| {abs(self.avg_error)} exceeds "
                f"avg abs error {self.avg_abs_error}"
            )

    def to_json_dict(self) -> dict:
        return {
            "class": self.label,
            "count": self.count,
            "avg_confidence": self.avg_confidence,
            "avg_actual_weight": self.avg_actual,
            "avg_predicted_weight": self.avg_predicted,
            "avg_weight_error": self.avg_error,
            "avg_abs_weight_error": self.avg_abs_error,
        }


@dataclass
class PerClassReport:
    rows: list
    total: PerClassRow

    def to_json_dict(self) -> dict:
        return {
            "classes": [row.to_json_dict() for row in self.rows],
            "total": self.total.to_json_dict(),
        }


def _mean_row(label: str, samples: Sequence[WeightSample]) -> PerClassRow:
    n = len(samples)
    return PerClassRow(
        label=label,
        count=n,
        avg_confidence=sum(s.confidence for s in samples) / n,
        avg_actual=sum(s.actual for s in samples) / n,
        avg_predicted=sum(s.predicted for s in samples) / n,
        avg_error=sum(s.actual - s.predicted for s in samples) / n,
        avg_abs_error=sum(abs(s.actual - s.predicted) for s in samples) / n,
    )


def per_class_report(samples: Sequence[WeightSample]) -> PerClassReport:
    """Per-class means of confidence, weights, and errors plus a TOTAL row.

    Classes are listed alphabetically; TOTAL averages over all samples.
    """
    samples = list(samples)
    if not samples:
        raise EmptyDataset("per_class_report needs at least one sample")
    by_label = {}
    for s in samples:
        by_label.setdefault(s.label, []).append(s)
    rows = [_mean_row(label, by_label[label]) for label in sorted(by_label)]
    return PerClassReport(rows=rows, total=_mean_row("TOTAL", samples))


def format_regression_table(reports: dict) -> str:
    """Fixed-width table of regression metrics, one row per dataset split."""
    lines = [
        f"{'Dataset':<10} {'MSE':>12} {'RMSE':>10} {'MAE':>10} "
        f"{'MAPE':>10} {'R-Squared':>11}"
    ]
    for name, rep in reports.items():
        lines.append(
            f"{name:<10} {rep.mse:>12.4f} {rep.rmse:>10.4f} {rep.mae:>10.4f} "
            f"{rep.mape:>9.4f}% {rep.r_squared:>11.4f}"
        )
    return "\n".join(lines)


def format_per_class_table(report: PerClassReport) -> str:
    """Fixed-width per-class weight-error table, TOTAL row last."""
    header = (
        f"{'Class':<24} {'Avg Conf':>10} {'Avg Actual':>12} "
        f"{'Avg Predicted':>14} {'Avg Error':>11} {'Avg Abs Error':>14}"
    )
    lines = [header]
    for row in list(report.rows) + [report.total]:
        lines.append(
            f"{row.label:<24} {row.avg_confidence:>10.4f} {row.avg_actual:>12.4f} "
            f"{row.avg_predicted:>14.4f} {row.avg_error:>11.4f} {row.avg_abs_error:>14.4f}"
        )
    return "\n".join(lines)
