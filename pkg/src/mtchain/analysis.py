"""Turn chain runs into accuracy curves, size trajectories, power-law fits,
and directed pair matrices.

The accuracy of a run is the GLEU between each reference-language snapshot
and the original reference-language text, pinned to 1.0 at measurement
index 0.  Decay is modeled by the one-parameter law (t+1)**-alpha, fitted
by minimizing the root-mean-square error over the measured points (the
pinned origin is excluded from the average).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from .gleu import score_texts
from .runner import ChainRun, SourceText

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class AccuracyCurve:
    """Accuracy values indexed by measurement step; step 0 is the original."""

    points: tuple[tuple[int, float], ...]
    label: str = ""

    def __post_init__(self):
        previous = None
        for t, value in self.points:
            if previous is not None and t <= previous:
                raise ValueError("measurement indices must be strictly increasing")
            if t == 0 and value != 1.0:
                raise ValueError("the original text is pinned to accuracy 1.0")
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"accuracy {value} out of [0, 1] at t={t}")
            previous = t

    @property
    def n(self) -> int:
        """Measured points after the pinned origin."""
        return sum(1 for t, _ in self.points if t >= 1)

    def measured(self) -> list[tuple[int, float]]:
        return [(t, v) for t, v in self.points if t >= 1]


@dataclass(frozen=True)
class SizeCurve:
    points: tuple[tuple[int, float], ...]
    label: str = ""

    def __post_init__(self):
        previous = None
        for t, count in self.points:
            if previous is not None and t <= previous:
                raise ValueError("size indices must be strictly increasing")
            if count < 0:
                raise ValueError("word counts cannot be negative")
            previous = t


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    rmse: float
    n_points: int
    includes_origin: bool = False


@dataclass(frozen=True)
class CurveBand:
    """Mean curve with a constant half-width band (the fitted RMSE)."""

    curve: AccuracyCurve
    half_width: float

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError("half_width must be >= 0")


@dataclass(frozen=True)
class PairCell:
    mean: float
    count: int


@dataclass
class PairMatrix:
    """Directed per-language-pair averages of step-by-step scores."""

    languages: tuple[str, ...]
    cells: dict[tuple[str, str], PairCell]
    comparability: str = "reference-pivot"

    def overall_mean(self) -> float | None:
        """Mean over all off-diagonal cells; None when the matrix is empty."""
        values = [cell.mean for (src, tgt), cell in self.cells.items() if src != tgt]
        if not values:
            return None
        return sum(values) / len(values)


def power_decay(t: int, alpha: float) -> float:
    """Modeled accuracy after t hops: (t+1)**-alpha."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return (t + 1.0) ** (-alpha)


def curve_rmse(curve: AccuracyCurve, alpha: float) -> float:
    """Root-mean-square error of the decay model against the measured points."""
    measured = curve.measured()
    if not measured:
        raise ValueError("curve has no measured points after the origin")
    total = 0.0
    for t, value in measured:
        residual = value - power_decay(t, alpha)
        total += residual * residual
    return math.sqrt(total / len(measured))


def fit_power_law(
    curve: AccuracyCurve,
    lower: float = 0.0,
    upper: float = 10.0,
    tolerance: float = 1e-9,
) -> PowerLawFit:
    """Fit alpha by RMSE minimization over [lower, upper].

    A coarse scan brackets the global minimum (the objective is smooth and
    in practice unimodal), then golden-section search narrows the bracket
    to the absolute tolerance.
    """
    if not curve.measured():
        raise ValueError("cannot fit a curve with no measured points")

    def objective(alpha: float) -> float:
        return curve_rmse(curve, alpha)

    step = (upper - lower) / 1000.0
    best_idx = 0
    best_val = math.inf
    grid = [lower + i * step for i in range(1001)]
    for i, alpha in enumerate(grid):
        value = objective(alpha)
        if value < best_val:
            best_val = value
            best_idx = i
    lo = grid[max(best_idx - 1, 0)]
    hi = grid[min(best_idx + 1, len(grid) - 1)]

    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = objective(x1), objective(x2)
    while b - a > tolerance:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = objective(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = objective(x2)
    # the exact grid point can beat the bracket midpoint when the minimum
    # sits on a boundary (a perfectly flat curve fits alpha = 0 exactly)
    candidates = [(a + b) / 2.0, a, b, grid[best_idx]]
    alpha = min(candidates, key=objective)
    return PowerLawFit(alpha=alpha, rmse=curve_rmse(curve, alpha), n_points=curve.n)


def _measurements(run: ChainRun) -> list[tuple[str, str]]:
    """(visited language, reference-language text) per measurement step.

    In pivot topology a measurement closes a reference round trip, so the
    visited language is the hop source; in direct topology every hop visits
    its target.
    """
    series: list[tuple[str, str]] = []
    direct = run.spec.topology == "direct"
    for hop in run.hops:
        if hop.measurement_text is None:
            continue
        series.append((hop.target if direct else hop.source, hop.measurement_text))
    return series


def accumulated_gleu(run: ChainRun, initial: SourceText | None = None) -> AccuracyCurve:
    """GLEU of every reference-language snapshot against the original text."""
    initial = initial if initial is not None else run.text
    if initial.language != run.spec.reference:
        raise ValueError(
            f"initial text is in {initial.language!r}, "
            f"but measurements are in {run.spec.reference!r}"
        )
    points = [(0, 1.0)]
    for index, (_, text) in enumerate(_measurements(run), start=1):
        points.append((index, score_texts(text, initial.body).value))
    return AccuracyCurve(points=tuple(points), label=run.run_id)


def stepwise_gleu(run: ChainRun) -> list[tuple[tuple[str, str], float]]:
    """GLEU between adjacent comparable texts, per directed language pair.

    Pivot runs compare consecutive reference-language snapshots and
    attribute each score to (previously visited language, newly visited
    language), starting from the reference.  Direct runs compare each raw
    output against its input (cross-language token overlap).
    """
    scores: list[tuple[tuple[str, str], float]] = []
    if run.spec.topology == "direct":
        for hop in run.hops:
            scores.append(
                ((hop.source, hop.target), score_texts(hop.output_text, hop.input_text).value)
            )
        return scores
    previous_language = run.spec.reference
    previous_text = run.text.body
    for visited, text in _measurements(run):
        scores.append(((previous_language, visited), score_texts(text, previous_text).value))
        previous_language = visited
        previous_text = text
    return scores


def aggregate_curves(
    curves: list[AccuracyCurve], label: str = "mean"
) -> tuple[AccuracyCurve, CurveBand, PowerLawFit]:
    """Pointwise mean of same-grid curves, with a fit and an RMSE band."""
    if not curves:
        raise ValueError("no curves to aggregate")
    grid = [t for t, _ in curves[0].points]
    for curve in curves[1:]:
        if [t for t, _ in curve.points] != grid:
            raise ValueError("curves must share the same measurement grid")
    mean_points = []
    for i, t in enumerate(grid):
        mean_points.append((t, sum(curve.points[i][1] for curve in curves) / len(curves)))
    mean_curve = AccuracyCurve(points=tuple(mean_points), label=label)
    fit = fit_power_law(mean_curve)
    return mean_curve, CurveBand(curve=mean_curve, half_width=fit.rmse), fit


def size_curve(run: ChainRun) -> SizeCurve:
    points = [(0, float(run.text.initial_word_count))]
    points.extend((hop.t, float(hop.output_word_count)) for hop in run.hops)
    return SizeCurve(points=tuple(points), label=run.run_id)


def size_trajectory(runs: list[ChainRun]) -> tuple[list[SizeCurve], SizeCurve, float]:
    """Per-run size curves, their pointwise mean, and final/initial ratio."""
    if not runs:
        raise ValueError("no runs supplied")
    per_run = [size_curve(run) for run in runs]
    length = min(len(curve.points) for curve in per_run)
    mean_points = []
    for i in range(length):
        t = per_run[0].points[i][0]
        mean_points.append((t, sum(curve.points[i][1] for curve in per_run) / len(per_run)))
    mean = SizeCurve(points=tuple(mean_points), label="mean")
    initial = mean.points[0][1]
    final = mean.points[-1][1]
    ratio = final / initial if initial else 0.0
    return per_run, mean, ratio


def pair_matrix(runs: list[ChainRun]) -> PairMatrix:
    """Average step-by-step score per directed language pair across runs."""
    sums: dict[tuple[str, str], float] = {}
    counts: dict[tuple[str, str], int] = {}
    languages: set[str] = set()
    for run in runs:
        for pair, score in stepwise_gleu(run):
            sums[pair] = sums.get(pair, 0.0) + score
            counts[pair] = counts.get(pair, 0) + 1
            languages.update(pair)
    cells = {
        pair: PairCell(mean=sums[pair] / counts[pair], count=counts[pair])
        for pair in sums
    }
    comparability = (
        "cross-language-low-validity"
        if any(run.spec.topology == "direct" for run in runs)
        else "reference-pivot"
    )
    return PairMatrix(
        languages=tuple(sorted(languages)), cells=cells, comparability=comparability
    )


def _fmt(value: float) -> str:
    return repr(float(value))


def write_curves_csv(path: str | Path, curves: list[AccuracyCurve]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["curve", "t", "value"])
        for curve in curves:
            for t, value in curve.points:
                writer.writerow([curve.label, t, _fmt(value)])


def write_sizes_csv(path: str | Path, curves: list[SizeCurve]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["curve", "t", "words"])
        for curve in curves:
            for t, count in curve.points:
                writer.writerow([curve.label, t, _fmt(count)])


def write_band_csv(path: str | Path, band: CurveBand) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "mean", "half_width", "lower", "upper"])
        for t, value in band.curve.points:
            writer.writerow([
                t, _fmt(value), _fmt(band.half_width),
                _fmt(value - band.half_width), _fmt(value + band.half_width),
            ])


def write_matrix_csv(path: str | Path, matrix: PairMatrix, counts: bool = False) -> None:
    """Row-major square table: first row/column are the language codes."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + list(matrix.languages))
        for src in matrix.languages:
            row: list[str] = [src]
            for tgt in matrix.languages:
                cell = matrix.cells.get((src, tgt))
                if cell is None:
                    row.append("")
                elif counts:
                    row.append(str(cell.count))
                else:
                    row.append(_fmt(cell.mean))
            writer.writerow(row)


def matrix_to_json(matrix: PairMatrix) -> dict:
    overall = matrix.overall_mean()
    return {
        "languages": list(matrix.languages),
        "cells": [
            {"source": src, "target": tgt, "mean": cell.mean, "count": cell.count}
            for (src, tgt), cell in sorted(matrix.cells.items())
        ],
        "overall_mean": overall,
        "comparability": matrix.comparability,
    }


def curve_to_json(curve: AccuracyCurve) -> dict:
    return {"label": curve.label, "points": [[t, v] for t, v in curve.points]}


def fit_to_json(fit: PowerLawFit) -> dict:
    return {
        "alpha": fit.alpha,
        "rmse": fit.rmse,
        "n_points": fit.n_points,
        "includes_origin": fit.includes_origin,
    }


def load_curve_csv(path: str | Path) -> list[AccuracyCurve]:
    """Read curves back from the CSV layout written by write_curves_csv.

    Plain two-column (t, value) files are accepted as a single unlabeled
    curve.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty curve file")
    header = [h.strip().lower() for h in rows[0]]
    if header[-2:] != ["t", "value"] or len(header) not in (2, 3):
        raise ValueError(f"{path}: expected header (curve,)t,value")
    labeled = len(header) == 3
    grouped: dict[str, list[tuple[int, float]]] = {}
    for row in rows[1:]:
        if not row:
            continue
        label = row[0] if labeled else ""
        t, value = int(row[-2]), float(row[-1])
        grouped.setdefault(label, []).append((t, value))
    return [
        AccuracyCurve(points=tuple(sorted(points)), label=label)
        for label, points in grouped.items()
    ]
