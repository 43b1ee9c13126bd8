"""Aggregate run records into stage tables and win/loss tallies."""

from __future__ import annotations

import csv
import io
import statistics
from collections import defaultdict
from typing import Iterable, Sequence

from .records import RunRecord

SYSTEM_ORDER = ["no_feedback", "refine", "ensemble", "network_members", "network"]

METRICS_COLUMNS = ["repeat", "system", "stage", "node", "accuracy"]
SUMMARY_COLUMNS = ["system", "stage", "mean", "std", "spread_pct", "n"]
TALLY_COLUMNS = ["repeat", "phase", "system", "win", "loss", "tie", "total"]


def metrics_rows(record: RunRecord) -> list[dict]:
    """Long-format accuracy rows: one per (system, stage, node) plus a ``final`` row per stage."""
    repeat = record.header()["repeat"]
    rows = []
    for ev in record.of("stage"):
        system = ev["system"]
        rows.append({"repeat": repeat, "system": system, "stage": ev["stage"], "node": "final", "accuracy": ev["accuracy"]})
        if system == "network" and ev.get("member_mean") is not None:
            rows.append({"repeat": repeat, "system": "network_members", "stage": ev["stage"],
                         "node": "final", "accuracy": ev["member_mean"]})
        for node, acc in sorted(ev["per_node_accuracy"].items()):
            rows.append({"repeat": repeat, "system": system, "stage": ev["stage"], "node": node, "accuracy": acc})
    return rows


def summarize(rows: Iterable[dict]) -> list[dict]:
    """Mean, population std and relative spread (std / mean, percent) of final accuracies over repeats."""
    groups: dict[tuple[str, int], list[float]] = defaultdict(list)
    for r in rows:
        if r["node"] == "final":
            groups[(r["system"], int(r["stage"]))].append(float(r["accuracy"]))
    order = {s: i for i, s in enumerate(SYSTEM_ORDER)}
    out = []
    for (system, stage), vals in sorted(groups.items(), key=lambda kv: (order.get(kv[0][0], 99), kv[0][0], kv[0][1])):
        mean = statistics.fmean(vals)
        std = statistics.pstdev(vals) if len(vals) > 1 else 0.0
        out.append({
            "system": system, "stage": stage, "mean": round(mean, 6), "std": round(std, 6),
            "spread_pct": round(100 * std / mean, 2) if mean else 0.0, "n": len(vals),
        })
    return out


def stage_table(summary: Sequence[dict]) -> list[list]:
    """Wide table: one row per system, one ``mean (±spread%)`` cell per stage."""
    stages = sorted({r["stage"] for r in summary})
    by_system: dict[str, dict[int, dict]] = defaultdict(dict)
    for r in summary:
        by_system[r["system"]][r["stage"]] = r
    table = [["system"] + [str(s) for s in stages]]
    for system, cells in by_system.items():
        row = [system]
        for s in stages:
            c = cells.get(s)
            row.append(f"{c['mean']:.3f} (±{c['spread_pct']:.2f}%)" if c else "")
        table.append(row)
    return table


def tally_rows(record: RunRecord) -> list[dict]:
    repeat = record.header()["repeat"]
    return [{"repeat": repeat, **{k: ev[k] for k in TALLY_COLUMNS if k != "repeat"}} for ev in record.of("tally")]


def pair_rows(record: RunRecord) -> list[dict]:
    repeat = record.header()["repeat"]
    keep = ("sample", "phase", "sentence", "sentiment", "a", "b", "winner", "rationale", "order")
    return [{"repeat": repeat, **{k: ev[k] for k in keep}} for ev in record.of("pair")]


def to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def table_csv(table: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(table)
    return buf.getvalue()
