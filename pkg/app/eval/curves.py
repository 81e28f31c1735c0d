"""
Context-efficiency curves and their Pareto frontier
"""
import csv
import io
from pathlib import Path
from typing import List, Sequence, Tuple

from app.database.datastore import write_text
from .schemas import Curve, CurvePoint, MetricReport

CURVE_HEADER = ["budget_tokens", "metric", "score"]


def build_curve(runs: Sequence[Tuple[int, MetricReport]], label: str = "") -> Curve:
    """
    Turn (budget, report) pairs into a curve sorted by budget.

    Raises:
        ValueError: On a repeated budget, or reports for different metrics
    """
    budgets = [budget for budget, _ in runs]
    if len(set(budgets)) != len(budgets):
        raise ValueError(f"Duplicate budgets in curve input: {sorted(budgets)}")
    metrics = {report.metric_name for _, report in runs}
    if len(metrics) > 1:
        raise ValueError(f"Curve mixes metrics: {sorted(metrics)}")

    points = [CurvePoint(budget_b=budget, score_s=report.aggregate) for budget, report in sorted(runs, key=lambda r: r[0])]
    return Curve(metric_name=metrics.pop() if metrics else "", label=label, points=points)


def dominates(q: CurvePoint, p: CurvePoint) -> bool:
    """q dominates p: no more budget, no less score, one of them strictly."""
    return q.budget_b <= p.budget_b and q.score_s >= p.score_s and (
        q.budget_b < p.budget_b or q.score_s > p.score_s
    )


def pareto_frontier(points: Sequence[CurvePoint]) -> List[CurvePoint]:
    """
    Non-dominated points, sorted by budget, with strictly increasing scores.

    Sweeps budgets upward (best score first within a budget) and keeps a point only
    if it beats every score seen so far.
    """
    frontier: List[CurvePoint] = []
    for point in sorted(points, key=lambda p: (p.budget_b, -p.score_s)):
        if not frontier or point.score_s > frontier[-1].score_s:
            frontier.append(point)
    return frontier


def weakly_dominates(upper: Curve, lower: Curve, max_budget: int) -> bool:
    """upper scores at least as high as lower at every shared budget up to max_budget."""
    lower_scores = {p.budget_b: p.score_s for p in lower.points}
    shared = [p for p in upper.points if p.budget_b <= max_budget and p.budget_b in lower_scores]
    return all(p.score_s >= lower_scores[p.budget_b] for p in shared)


def curve_csv(curve: Curve, points: Sequence[CurvePoint] = None) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CURVE_HEADER)
    for point in curve.points if points is None else points:
        writer.writerow([point.budget_b, curve.metric_name, f"{point.score_s:.10f}"])
    return buffer.getvalue()


def write_curve_csv(curve: Curve, path: Path) -> None:
    write_text(path, curve_csv(curve))


def write_frontier_csv(curve: Curve, path: Path) -> None:
    write_text(path, curve_csv(curve, pareto_frontier(curve.points)))


def read_curve_csv(path: Path, label: str = "") -> Curve:
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    metric = rows[0]["metric"] if rows else ""
    points = [CurvePoint(budget_b=int(row["budget_tokens"]), score_s=float(row["score"])) for row in rows]
    return Curve(metric_name=metric, label=label, points=points)
