"""Accuracy and system-impact scoring, with plain-text and CSV reports."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import DataError
from .schema import Dataset, NormalizationParams


@dataclass
class AccuracyReport:
    mode: str
    mse: float
    mean_estimated: float
    mean_target: float
    errors: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.errors.size


@dataclass
class ImpactRow:
    name: str
    mse: float
    mean_output: float
    mean_target: float


@dataclass
class ImpactReport:
    mode: str
    rows: list[ImpactRow]
    per_sample_error: np.ndarray = field(repr=False)

    def row(self, name: str) -> ImpactRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


@dataclass
class Comparison:
    winner: str | None
    reports: tuple[AccuracyReport, AccuracyReport]

    @property
    def tie(self) -> bool:
        return self.winner is None


def score_estimates(estimates: Sequence[float], truth: Sequence[float], mode: str = "") -> AccuracyReport:
    """MSE and means of estimates against true values (original units)."""
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape or est.ndim != 1:
        raise DataError(f"length mismatch: {est.shape} estimates vs {tru.shape} truth")
    if est.size == 0:
        raise DataError("nothing to score")
    err = est - tru
    return AccuracyReport(mode, float(np.mean(err * err)), float(est.mean()), float(tru.mean()), err)


def impact_assessment(model, imputed: Dataset, reference: Dataset, mode: str = "",
                      norm: NormalizationParams | None = None) -> ImpactReport:
    """Pass the completed dataset through the network and compare with the truth.

    ``model`` maps normalized batches to reconstructions. Outputs are mapped
    back to original units before per-variable MSE and means are taken.
    """
    if len(imputed) != len(reference):
        raise DataError(f"size mismatch: {len(imputed)} imputed vs {len(reference)} reference")
    if not (imputed.complete_mask.all() and reference.complete_mask.all()):
        raise DataError("impact assessment needs complete datasets")
    if norm is None:
        norm = getattr(model, "norm", None) or NormalizationParams.from_schema(imputed.schema)
    X = imputed.values if imputed.normalized else norm.scale(imputed.values)
    ref = norm.unscale(reference.values) if reference.normalized else reference.values
    out = norm.unscale(np.asarray(model(X), dtype=float))
    diff = out - ref
    mse = np.mean(diff * diff, axis=0)
    rows = [
        ImpactRow(name, float(mse[j]), float(out[:, j].mean()), float(ref[:, j].mean()))
        for j, name in enumerate(imputed.schema.names)
    ]
    return ImpactReport(mode, rows, np.mean(diff, axis=1))


def compare_modes(a: AccuracyReport, b: AccuracyReport) -> Comparison:
    if a.mse < b.mse:
        winner = a.mode
    elif b.mse < a.mse:
        winner = b.mode
    else:
        winner = None
    return Comparison(winner, (a, b))


# --- report writers -------------------------------------------------------

def _r(x: float) -> str:
    return repr(float(x))


def accuracy_table_csv(reports: Sequence[AccuracyReport]) -> str:
    """Accuracy table: rows MSE and Mean, a Target column then one per mode."""
    header = ["metric", "target"] + [r.mode for r in reports]
    target_mean = reports[0].mean_target if reports else float("nan")
    lines = [",".join(header)]
    lines.append(",".join(["mse", "0.0"] + [_r(r.mse) for r in reports]))
    lines.append(",".join(["mean", _r(target_mean)] + [_r(r.mean_estimated) for r in reports]))
    return "\n".join(lines) + "\n"


def impact_table_csv(report: ImpactReport) -> str:
    """Tables 5-6 layout; MSE is scaled by 1e3."""
    lines = ["variable,mse_e-3,mean,target_mean"]
    for row in report.rows:
        lines.append(f"{row.name},{_r(row.mse * 1e3)},{_r(row.mean_output)},{_r(row.mean_target)}")
    return "\n".join(lines) + "\n"


def per_sample_csv(columns: dict[str, np.ndarray], index=None) -> str:
    names = list(columns)
    n = max((len(v) for v in columns.values()), default=0)
    idx = np.arange(n) if index is None else np.asarray(index)
    lines = [",".join(["sample"] + names)]
    for k in range(n):
        cells = [str(int(idx[k]))]
        for name in names:
            col = columns[name]
            cells.append(_r(col[k]) if k < len(col) else "")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def format_accuracy(reports: Sequence[AccuracyReport], comparison: Comparison | None = None) -> str:
    width = max([10] + [len(r.mode) for r in reports]) + 2
    lines = ["Estimation accuracy", f"{'':<8}{'Target':>{width}}" + "".join(f"{r.mode:>{width}}" for r in reports)]
    if reports:
        lines.append(f"{'MSE':<8}{0.0:>{width}.4f}" + "".join(f"{r.mse:>{width}.4f}" for r in reports))
        lines.append(
            f"{'Mean':<8}{reports[0].mean_target:>{width}.4f}"
            + "".join(f"{r.mean_estimated:>{width}.4f}" for r in reports)
        )
    if comparison is not None:
        if comparison.tie:
            lines.append("Result: tie (equal MSE)")
        else:
            lines.append(f"Result: {comparison.winner} has the lower MSE")
    return "\n".join(lines) + "\n"


def format_impact(report: ImpactReport) -> str:
    lines = [f"Impact assessment ({report.mode})",
             f"{'Variable':<12}{'MSE (1e-3)':>14}{'Mean':>12}{'Target Mean':>14}"]
    for row in report.rows:
        lines.append(f"{row.name:<12}{row.mse * 1e3:>14.5g}{row.mean_output:>12.5g}{row.mean_target:>14.5g}")
    return "\n".join(lines) + "\n"


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")
