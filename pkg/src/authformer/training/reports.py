"""CSV and plain-text renderings of metrics, ablation and depth-sweep results.

CSV cells: text quoted, metrics as decimals with four places, counts as integers.
"""

import csv
import io
from decimal import Decimal
from pathlib import Path
from typing import Any, Sequence

from loguru import logger

from authformer.data.storage import PathLike, atomic_write_text
from authformer.training.harness import AblationGain, AblationRow, DepthRow
from authformer.training.metrics import MetricsReport, OperatingPoint

Table = tuple[list[str], list[list[Any]]]


def metric(x: float) -> Decimal:
    return Decimal(f"{x:.4f}")


def to_csv(table: Table) -> str:
    header, rows = table
    buf = io.StringIO()
    writer = csv.writer(buf, quoting=csv.QUOTE_NONNUMERIC, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_csv(path: PathLike, table: Table) -> Path:
    out = atomic_write_text(path, to_csv(table))
    logger.info(f"Report written to {out} ({len(table[1])} rows)")
    return out


def format_table(table: Table) -> str:
    header, rows = table
    cells = [header] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def metrics_table(report: MetricsReport) -> Table:
    header = ["combination", "n_samples", "accuracy", "macro_recall", "macro_f1"]
    row: list[Any] = [report.combination, report.n_samples, metric(report.accuracy),
                      metric(report.macro_recall), metric(report.macro_f1)]
    if report.eer is not None:
        header += ["threshold", "tar", "frr", "far", "eer"]
        row += [metric(v) for v in (report.threshold, report.tar, report.frr, report.far, report.eer)]
    return header, [row]


def per_class_table(report: MetricsReport) -> Table:
    header = ["class", "support", "precision", "recall", "f1"]
    rows = [[c.label, c.support, metric(c.precision), metric(c.recall), metric(c.f1)] for c in report.per_class]
    return header, rows


def operating_point_table(combination: str, point: OperatingPoint) -> Table:
    header = ["combination", "threshold", "tar", "frr", "far"]
    return header, [[combination, metric(point.threshold), metric(point.tar), metric(point.frr), metric(point.far)]]


def ablation_table(rows: Sequence[AblationRow]) -> Table:
    header = ["combination", "accuracy", "macro_f1", "macro_recall"]
    return header, [[r.combination, metric(r.accuracy), metric(r.macro_f1), metric(r.macro_recall)] for r in rows]


def gains_table(gains: Sequence[AblationGain]) -> Table:
    header = ["combination", "accuracy", "best_unimodal", "best_unimodal_accuracy", "gain"]
    rows = [
        [g.combination, metric(g.accuracy), g.best_unimodal, metric(g.best_unimodal_accuracy), metric(g.gain)]
        for g in gains
    ]
    return header, rows


def depth_table(rows: Sequence[DepthRow]) -> Table:
    header = ["layers", "accuracy", "seconds_per_epoch", "parameters"]
    return header, [[r.layers, metric(r.accuracy), metric(r.seconds_per_epoch), r.parameters] for r in rows]
