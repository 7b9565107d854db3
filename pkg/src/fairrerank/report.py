"""Rendering of evaluation rows as CSV, JSON, and markdown tables.

One row per (model, type, lambda): type "N" is the fairness-unaware
baseline (lambda = 0) and "P" a fairness-aware grid point. The CSV column
set mirrors the standard results-table layout plus the fairness gap and
the lambda that produced the row.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .metrics import EvaluationReport

__all__ = ["ReportRow", "render_csv", "render_json", "render_markdown"]

CSV_COLUMNS = (
    "model",
    "type",
    "lambda",
    "NDCG",
    "Pre",
    "Rec",
    "Nov",
    "Div",
    "Cov",
    "Per",
    "Ser",
    "Short",
    "Rel_Short",
    "Long",
    "Rel_Long",
    "F",
)


@dataclass(frozen=True)
class ReportRow:
    model: str
    row_type: str  # "N" or "P"
    lam: float
    report: EvaluationReport


def _metric_cells(report: EvaluationReport, float_fmt: str, int_fmt) -> list[str]:
    return [
        format(report.ndcg, float_fmt),
        format(report.precision, float_fmt),
        format(report.recall, float_fmt),
        format(report.novelty, float_fmt),
        format(report.diversity, float_fmt),
        format(report.coverage, float_fmt),
        format(report.personalization, float_fmt),
        format(report.serendipity, float_fmt),
        int_fmt(report.short_count),
        int_fmt(report.rel_short),
        int_fmt(report.long_count),
        int_fmt(report.rel_long),
        format(report.fairness_gap, float_fmt),
    ]


def render_csv(rows: list[ReportRow]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        cells = [row.model, row.row_type, format(row.lam, "g")]
        cells += _metric_cells(row.report, ".6f", str)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def render_json(rows: list[ReportRow]) -> str:
    payload = [
        {"model": row.model, "type": row.row_type, "lambda": row.lam, **row.report.as_dict()}
        for row in rows
    ]
    return json.dumps({"rows": payload}, indent=2, sort_keys=True) + "\n"


def render_markdown(rows: list[ReportRow]) -> str:
    header = (
        "| Model | Type | λ | NDCG | Pre | Rec | Nov. | Div. | Cov. | Per. | Ser. "
        "| Short. | Rel_Short | Long. | Rel_Long | F |"
    )
    divider = "|" + "---|" * 16
    lines = [header, divider]
    for row in rows:
        cells = [row.model, row.row_type, format(row.lam, "g")]
        cells += _metric_cells(row.report, ".4f", lambda v: f"{v:,}")
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
