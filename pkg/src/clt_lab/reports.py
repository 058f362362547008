"""Bound reports: the record type every checked inequality produces.

A ``BoundReport`` carries both sides of one checked inequality, the method
used for the left side, a certified error budget, and the named parameters of
the check.  ``passed`` is defined as ``lhs <= rhs + error_budget`` and the
constructor enforces that invariant.

This module also owns rendering: JSON documents (deterministic bytes -- no
timestamps, floats via shortest round-trip repr), CSV with one row per check,
and the companion matplotlib figures written next to the CSV.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class BoundReport:
    """Both sides of a checked inequality lhs <= rhs, with provenance."""

    name: str
    lhs: float
    rhs: float
    lhs_method: str  # "exact" | "monte_carlo"
    error_budget: float
    params: dict = field(default_factory=dict)
    certified: bool = True
    notes: str = ""

    def __post_init__(self):
        if self.lhs_method not in ("exact", "monte_carlo"):
            raise ReportError(f"unknown lhs_method {self.lhs_method!r}")
        if self.error_budget < 0:
            raise ReportError("error_budget must be >= 0")

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + self.error_budget

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "lhs_method": self.lhs_method,
            "error_budget": self.error_budget,
            "pass": self.passed,
            "certified": self.certified,
            "notes": self.notes,
            "params": self.params,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "BoundReport":
        return cls(
            name=rec["name"],
            lhs=float(rec["lhs"]),
            rhs=float(rec["rhs"]),
            lhs_method=rec.get("lhs_method", "exact"),
            error_budget=float(rec.get("error_budget", 0.0)),
            params=rec.get("params", {}),
            certified=bool(rec.get("certified", True)),
            notes=rec.get("notes", ""),
        )


def _jsonable(value):
    import numpy as np

    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def report_document(reports: Sequence[BoundReport], meta: dict | None = None) -> dict:
    """JSON document for a report list.  Deterministic: no timestamps."""
    doc_meta = {"tool": "clt-lab"}
    if meta:
        doc_meta.update(meta)
    return {
        "meta": _jsonable(doc_meta),
        "results": [_jsonable(r.to_record()) for r in reports],
    }


def dump_reports(reports: Sequence[BoundReport], path: str | Path, meta: dict | None = None) -> None:
    doc = report_document(reports, meta)
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(doc, fp, indent=1, sort_keys=True)
        fp.write("\n")


def load_reports(path: str | Path) -> list[BoundReport]:
    with open(path, encoding="utf-8") as fp:
        doc = json.load(fp)
    records = doc["results"] if isinstance(doc, dict) else doc
    return [BoundReport.from_record(rec) for rec in records]


CSV_COLUMNS = ["name", "lhs", "rhs", "margin", "pass", "error_budget", "params"]


def write_csv(reports: Sequence[BoundReport], path: str | Path) -> int:
    """One CSV row per report; returns the row count (excludes the header)."""
    with open(path, "w", newline="", encoding="utf-8") as fp:
        writer = csv.writer(fp)
        writer.writerow(CSV_COLUMNS)
        for r in reports:
            writer.writerow(
                [
                    r.name,
                    repr(r.lhs),
                    repr(r.rhs),
                    repr(r.margin),
                    str(r.passed),
                    repr(r.error_budget),
                    json.dumps(_jsonable(r.params), sort_keys=True),
                ]
            )
    return len(reports)


def render_figures(reports: Sequence[BoundReport], directory: str | Path, stem: str) -> list[Path]:
    """Write the two companion figures for a report list.

    One margin chart (sorted, pass/fail colored) and one lhs-vs-rhs scatter
    with the y = x boundary.  Returns the written paths.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if not reports:
        return written

    margins = [r.margin for r in reports]
    colors = ["#2a7e43" if r.passed else "#b5351f" for r in reports]
    order = sorted(range(len(reports)), key=lambda i: margins[i])

    fig, ax = plt.subplots(figsize=(8, max(2.5, min(12, 0.14 * len(reports) + 1.5))))
    ax.barh(range(len(order)), [margins[i] for i in order], color=[colors[i] for i in order])
    ax.axvline(0.0, color="black", lw=0.8)
    ax.set_xlabel("margin = rhs - lhs")
    ax.set_ylabel("checks (sorted by margin)")
    ax.set_title(f"{stem}: bound margins ({sum(r.passed for r in reports)}/{len(reports)} pass)")
    if len(reports) <= 40:
        ax.set_yticks(range(len(order)))
        ax.set_yticklabels([reports[i].name for i in order], fontsize=6)
    else:
        ax.set_yticks([])
    fig.tight_layout()
    path = directory / f"{stem}_margins.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5.5, 5))
    lhs = [max(r.lhs, 1e-18) for r in reports]
    rhs = [max(r.rhs + r.error_budget, 1e-18) for r in reports]
    ax.scatter(rhs, lhs, s=14, c=colors, alpha=0.75, edgecolors="none")
    lim_lo = min(min(lhs), min(rhs)) * 0.5
    lim_hi = max(max(lhs), max(rhs)) * 2.0
    ax.plot([lim_lo, lim_hi], [lim_lo, lim_hi], "k--", lw=0.8, label="lhs = rhs + budget")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlim(lim_lo, lim_hi)
    ax.set_ylim(lim_lo, lim_hi)
    ax.set_xlabel("rhs + error budget")
    ax.set_ylabel("lhs")
    ax.set_title(f"{stem}: checked sides")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    path = directory / f"{stem}_sides.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written


def all_passed(reports: Iterable[BoundReport]) -> bool:
    return all(r.passed for r in reports)
