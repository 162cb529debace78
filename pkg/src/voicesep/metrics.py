"""Binary link metrics (positive class): precision, recall, F1."""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["MetricsReport", "link_metrics", "pool_metrics", "macro_metrics"]


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    n_predicted: int
    n_target: int
    n_correct: int

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "n_predicted": self.n_predicted,
            "n_target": self.n_target,
            "n_correct": self.n_correct,
        }


def _from_counts(n_pred: int, n_target: int, n_correct: int) -> MetricsReport:
    # Degenerate conventions: empty vs empty counts as perfect; an empty
    # side against a nonempty one scores 0.
    if n_pred == 0:
        precision = 1.0 if n_target == 0 else 0.0
    else:
        precision = n_correct / n_pred
    if n_target == 0:
        recall = 1.0 if n_pred == 0 else 0.0
    else:
        recall = n_correct / n_target
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return MetricsReport(precision, recall, f1, n_pred, n_target, n_correct)


def link_metrics(predicted: set[tuple[str, str]], target: set[tuple[str, str]]) -> MetricsReport:
    """Compare predicted and ground-truth link sets for one piece."""
    return _from_counts(len(predicted), len(target), len(predicted & target))


def pool_metrics(reports: list[MetricsReport]) -> MetricsReport:
    """Micro average: pool the link counts across pieces, then score."""
    return _from_counts(
        sum(r.n_predicted for r in reports),
        sum(r.n_target for r in reports),
        sum(r.n_correct for r in reports),
    )


def macro_metrics(reports: list[MetricsReport]) -> MetricsReport:
    """Macro average: mean of the per-piece metrics."""
    if not reports:
        return _from_counts(0, 0, 0)
    n = len(reports)
    precision = sum(r.precision for r in reports) / n
    recall = sum(r.recall for r in reports) / n
    f1 = sum(r.f1 for r in reports) / n
    return MetricsReport(
        precision, recall, f1,
        sum(r.n_predicted for r in reports),
        sum(r.n_target for r in reports),
        sum(r.n_correct for r in reports),
    )
