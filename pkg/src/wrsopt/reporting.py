"""Log analysis: per-run summaries, polynomial trend fits, and the
cross-strategy comparison table.

Statistics conventions, also recorded in the CSV/text schemas: best/mean/SD
are computed over all trials and, in parentheses, over the trailing window
(default 100).  SD is the population form (divisor = count).  Failed trials
are excluded from the statistics but keep their place in iteration indexing;
the exclusion count is reported.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .triallog import RunHeader, TrialRecord

STRATEGY_ORDER = {"wrs": 0, "rs": 1, "sobol": 2, "nelder-mead": 3, "pso": 4}

CSV_COLUMNS = ("strategy", "best", "best_lastW", "mean", "mean_lastW", "sd", "sd_lastW")


class ReportError(ValueError):
    """Summary or fit cannot be produced from the given log."""


@dataclass(frozen=True)
class FitResult:
    """Least-squares polynomial of score against iteration index.

    Coefficients are ascending powers of t where t = -1 + 2(x - x0)/(x1 - x0)
    maps the fitted iteration range [x0, x1] onto [-1, 1]; the domain is kept
    so external tools can evaluate the curve at raw indices.
    """

    degree: int
    coefficients: tuple[float, ...]
    domain: tuple[float, float]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x0, x1 = self.domain
        t = -1.0 + 2.0 * (np.asarray(x, dtype=float) - x0) / (x1 - x0)
        return np.polynomial.polynomial.polyval(t, np.asarray(self.coefficients))


def polyfit(scores: Sequence[float], degree: int = 5, x: Sequence[float] | None = None) -> FitResult:
    """Fit scores against their positions (default 1..n), returning ascending
    coefficients on the normalized domain.  Needs more points than degree."""
    y = np.asarray(scores, dtype=float)
    if degree < 0:
        raise ReportError("degree must be non-negative")
    if y.size <= degree:
        raise ReportError(f"need more than {degree} points for a degree-{degree} fit, have {y.size}")
    xs = np.arange(1, y.size + 1, dtype=float) if x is None else np.asarray(x, dtype=float)
    if xs.size != y.size:
        raise ReportError("x and scores must have equal length")
    x0, x1 = float(xs.min()), float(xs.max())
    if x0 == x1:
        raise ReportError("fit positions are all identical")
    t = -1.0 + 2.0 * (xs - x0) / (x1 - x0)
    vandermonde = np.vander(t, degree + 1, increasing=True)
    coeffs, *_ = np.linalg.lstsq(vandermonde, y, rcond=None)
    return FitResult(degree=degree, coefficients=tuple(float(c) for c in coeffs), domain=(x0, x1))


def fit_to_dict(fit: FitResult) -> dict:
    return {
        "degree": fit.degree,
        "domain": list(fit.domain),
        "coefficients": list(fit.coefficients),
        "basis": "ascending powers of t, t = -1 + 2*(x - x0)/(x1 - x0)",
    }


@dataclass(frozen=True)
class RunReport:
    strategy: str
    seed: int
    source: str
    budget: int
    window: int
    n_failed: int
    n_cached: int
    best: float
    best_iteration: int
    best_window: float
    mean: float
    mean_window: float
    sd: float
    sd_window: float
    fit: FitResult | None


def _stats(records: Sequence[TrialRecord]) -> tuple[float, float, float]:
    scores = np.array([r.score for r in records], dtype=float)
    if scores.size == 0:
        return math.nan, math.nan, math.nan
    return float(scores.max()), float(scores.mean()), float(scores.std(ddof=0))


def summarize(
    header: RunHeader,
    records: Sequence[TrialRecord],
    window: int = 100,
    degree: int = 5,
    source: str = "",
) -> RunReport:
    """Condense one log into its report row.

    The trailing window covers exactly min(window, N) records by position;
    failed trials inside it stay excluded from the statistics.
    """
    if not records:
        raise ReportError("log holds no trials")
    if window < 1:
        raise ReportError("window must be at least 1")
    valid = [r for r in records if r.status != "failed" and math.isfinite(r.score)]
    if not valid:
        raise ReportError("no successful trials to summarize")

    w_eff = min(window, len(records))
    tail_valid = [r for r in records[-w_eff:] if r.status != "failed" and math.isfinite(r.score)]

    best, mean, sd = _stats(valid)
    best_w, mean_w, sd_w = _stats(tail_valid)
    best_iteration = next(r.iteration for r in valid if r.score == best)

    fit = None
    if len(valid) > degree:
        fit = polyfit(
            [r.score for r in valid],
            degree=degree,
            x=[float(r.iteration) for r in valid],
        )

    return RunReport(
        strategy=header.strategy,
        seed=header.seed,
        source=source,
        budget=header.budget,
        window=w_eff,
        n_failed=len(records) - len(valid),
        n_cached=sum(1 for r in records if r.status == "cached-hit"),
        best=best,
        best_iteration=best_iteration,
        best_window=best_w,
        mean=mean,
        mean_window=mean_w,
        sd=sd,
        sd_window=sd_w,
        fit=fit,
    )


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[RunReport, ...]
    budget_mismatch: bool


def compare(reports: Sequence[RunReport]) -> ComparisonTable:
    """Order reports for side-by-side rendering and flag unequal budgets."""
    if not reports:
        raise ReportError("nothing to compare")
    rows = tuple(
        sorted(reports, key=lambda r: (STRATEGY_ORDER.get(r.strategy, len(STRATEGY_ORDER)), r.strategy, r.seed, r.source))
    )
    budgets = {r.budget for r in rows}
    return ComparisonTable(rows=rows, budget_mismatch=len(budgets) > 1)


def _pair(value: float, window_value: float) -> str:
    return f"{value:.2f}({window_value:.2f})"


def render_table_text(table: ComparisonTable) -> str:
    """Fixed-width text table, one row per run: best, mean, SD, each with the
    trailing-window figure in parentheses."""
    header = ("strategy", "seed", "best", "mean", "sd")
    body = [
        (r.strategy, str(r.seed), _pair(r.best, r.best_window), _pair(r.mean, r.mean_window), _pair(r.sd, r.sd_window))
        for r in table.rows
    ]
    widths = [max(len(h), *(len(row[i]) for row in body)) for i, h in enumerate(header)]
    lines = []
    if table.budget_mismatch:
        budgets = sorted({r.budget for r in table.rows})
        lines.append(f"warning: logs differ in budget {budgets}; rows are not under the same computational budget")
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
    for row in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def render_table_csv(table: ComparisonTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in table.rows:
        writer.writerow(
            [r.strategy, repr(r.best), repr(r.best_window), repr(r.mean), repr(r.mean_window), repr(r.sd), repr(r.sd_window)]
        )
    return buf.getvalue()


def render_report_text(report: RunReport) -> str:
    """Single-run detail block: the table row plus context lines."""
    table = ComparisonTable(rows=(report,), budget_mismatch=False)
    lines = [render_table_text(table).rstrip("\n")]
    lines.append(f"budget: {report.budget}  window: {report.window}")
    lines.append(f"best: {report.best:.6g} at iteration {report.best_iteration}")
    lines.append(f"failed: {report.n_failed}  cached: {report.n_cached}")
    if report.fit is not None:
        coeffs = " ".join(f"{c:.6g}" for c in report.fit.coefficients)
        lines.append(f"fit: degree {report.fit.degree} over iterations [{report.fit.domain[0]:.0f}, {report.fit.domain[1]:.0f}], coefficients {coeffs}")
    else:
        lines.append("fit: skipped (too few successful trials)")
    return "\n".join(lines) + "\n"
