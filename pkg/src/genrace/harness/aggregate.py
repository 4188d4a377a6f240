"""Seed-averaged tables, best-over-training summaries and plot-ready exports."""
from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path

from .race import RECORDS, load_records

METRICS = ("E", "R", "R_norm", "F", "C", "C_norm", "Cq", "MV", "U", "Q_u_reached")
MINIMIZED = frozenset({"MV", "U"})
SUMMARY_METRICS = ("Cq", "MV", "U")
CSV_HEADER = ("model", "epoch", "track", "metric", "mean", "stderr", "n")
FORMATS = ("csv", "json")


class EmptyRunError(FileNotFoundError):
    pass


@dataclass(frozen=True)
class AggregateRow:
    epsilon: float
    model: str
    track: str
    epoch: int
    metric: str
    mean: float | None
    stderr: float | None
    n: int


def mean_stderr(values) -> tuple[float | None, float | None, int]:
    """Mean and ``sqrt(sample variance / n)``; a single value has stderr 0."""
    vals = [float(v) for v in values if v is not None]
    n = len(vals)
    if n == 0:
        return None, None, 0
    mean = math.fsum(vals) / n
    if n == 1:
        return mean, 0.0, 1
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
    return mean, math.sqrt(var / n), n


def aggregate_records(records: list[dict]) -> list[AggregateRow]:
    groups: dict[tuple, list[dict]] = defaultdict(list)
    for r in records:
        groups[(r["epsilon"], r["model"], r["track"], r["epoch"])].append(r)
    rows = []
    for (eps, model, track, epoch), recs in sorted(groups.items()):
        for metric in METRICS:
            mean, err, n = mean_stderr(r.get(metric) for r in recs)
            rows.append(AggregateRow(eps, model, track, epoch, metric, mean, err, n))
    return rows


def best_over_training(rows: list[AggregateRow]) -> list[AggregateRow]:
    """Per (epsilon, model, track, metric), the eval epoch with the extremal mean.

    MV and U are minimised, every other metric maximised. Earlier epochs win ties.
    """
    groups: dict[tuple, list[AggregateRow]] = defaultdict(list)
    for row in rows:
        if row.mean is not None:
            groups[(row.epsilon, row.model, row.track, row.metric)].append(row)
    best = []
    for key, cands in sorted(groups.items()):
        sign = 1 if key[3] in MINIMIZED else -1
        best.append(min(cands, key=lambda r: (sign * r.mean, r.epoch)))
    return best


def _fmt(row: AggregateRow | None) -> str:
    if row is None:
        return "-"
    if row.metric == "MV":
        return f"{row.mean:.2f}±{row.stderr:.2f}"
    return f"{row.mean:.4g}±{row.stderr:.2g}"


def format_best_table(best: list[AggregateRow]) -> str:
    """Text table with one block per data portion: model rows, track/metric columns."""
    index = {(r.epsilon, r.model, r.track, r.metric): r for r in best}
    out = []
    for eps in sorted({r.epsilon for r in best}):
        models = sorted({r.model for r in best if r.epsilon == eps})
        cols = [(t, m) for t in ("T1", "T2") for m in SUMMARY_METRICS]
        header = ["model"] + [f"{t} {m}" for t, m in cols]
        body = [[model] + [_fmt(index.get((eps, model, t, m))) for t, m in cols] for model in models]
        widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
        out.append(f"epsilon = {eps}")
        for line in [header] + body:
            out.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
        out.append("")
    return "\n".join(out)


def _require_records(run_dir: Path) -> list[dict]:
    if not (run_dir / RECORDS).exists():
        raise EmptyRunError(f"{run_dir}: no {RECORDS}; nothing to aggregate")
    records = load_records(run_dir)
    if not records:
        raise EmptyRunError(f"{run_dir}: {RECORDS} is empty")
    return records


def aggregate(run_dir: str | Path) -> tuple[list[AggregateRow], list[AggregateRow]]:
    """Aggregate a run directory and write ``aggregate.json`` next to the records."""
    run_dir = Path(run_dir)
    rows = aggregate_records(_require_records(run_dir))
    best = best_over_training(rows)
    doc = {"rows": [asdict(r) for r in rows], "best": [asdict(r) for r in best]}
    (run_dir / "aggregate.json").write_text(json.dumps(doc, indent=1))
    return rows, best


def _csv_value(v):
    return "" if v is None else v


def export(run_dir: str | Path, fmt: str, out_dir: str | Path | None = None) -> list[Path]:
    if fmt not in FORMATS:
        raise ValueError(f"unknown export format {fmt!r}; choose from {', '.join(FORMATS)}")
    run_dir = Path(run_dir)
    rows, best = aggregate(run_dir)
    out_dir = Path(out_dir or run_dir / "export")
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "json":
        path = out_dir / "aggregate.json"
        path.write_text(json.dumps({"rows": [asdict(r) for r in rows],
                                    "best": [asdict(r) for r in best]}, indent=1))
        return [path]
    by_table: dict[tuple, list[AggregateRow]] = defaultdict(list)
    by_series: dict[tuple, list[AggregateRow]] = defaultdict(list)
    for r in rows:
        by_table[(r.track, r.epsilon)].append(r)
        if r.n:
            by_series[(r.track, r.epsilon, r.metric)].append(r)
    for (track, eps), table in sorted(by_table.items()):
        path = out_dir / f"aggregate_{track}_eps{eps!r}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for r in table:
                w.writerow([r.model, r.epoch, r.track, r.metric, _csv_value(r.mean),
                            _csv_value(r.stderr), r.n])
        written.append(path)
    series_dir = out_dir / "series"
    series_dir.mkdir(exist_ok=True)
    for (track, eps, metric), series in sorted(by_series.items()):
        path = series_dir / f"{track}_eps{eps!r}_{metric}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("model", "epoch", "mean", "stderr"))
            for r in sorted(series, key=lambda r: (r.model, r.epoch)):
                w.writerow([r.model, r.epoch, r.mean, r.stderr])
        written.append(path)
    return written
