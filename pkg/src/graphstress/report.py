"""Seed/dataset aggregation and the nested metric report.

A report is a tree axis -> subcondition -> dataset -> method -> MetricCell.
Aggregation never collapses axes into a single score: results stay per-axis,
per-subcondition. Emission is byte-deterministic (sorted keys, repr floats)
so regenerating a report from identical inputs reproduces identical files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AllUndefined, EmptyInput


@dataclass(frozen=True)
class MetricCell:
    """Mean and sample std over n runs; undefined cells carry no numbers.

    ``note`` flags cells outside normal computation, e.g. "inapplicable" for
    method/channel combinations the protocol excludes (the tables' "--").
    """

    mean: float | None
    std: float | None
    n: int
    undefined: bool = False
    note: str = ""

    @classmethod
    def undef(cls, n: int = 0, note: str = "") -> "MetricCell":
        return cls(mean=None, std=None, n=n, undefined=True, note=note)

    def as_dict(self) -> dict:
        d: dict = {"n": self.n, "undefined": self.undefined}
        if not self.undefined:
            d["mean"] = self.mean
            d["std"] = self.std
        if self.note:
            d["note"] = self.note
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricCell":
        if d.get("undefined"):
            return cls.undef(int(d.get("n", 0)), note=d.get("note", ""))
        return cls(mean=float(d["mean"]), std=float(d["std"]), n=int(d["n"]),
                   undefined=False, note=d.get("note", ""))


def aggregate_seeds(values) -> MetricCell:
    """Mean and sample (n-1) std of per-seed values; std is 0 for one seed."""
    values = np.asarray(list(values), dtype=np.float64)
    if len(values) == 0:
        raise EmptyInput("no per-seed values to aggregate")
    if np.any(~np.isfinite(values)):
        raise EmptyInput("per-seed values must be finite")
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return MetricCell(mean=mean, std=std, n=len(values))


def cross_dataset(cells) -> MetricCell:
    """Mean of per-dataset means with between-dataset sample std."""
    defined = [c for c in cells if not c.undefined]
    if not defined:
        raise AllUndefined("no defined cells to aggregate across datasets")
    means = np.array([c.mean for c in defined], dtype=np.float64)
    mean = float(means.mean())
    std = float(means.std(ddof=1)) if len(means) > 1 else 0.0
    return MetricCell(mean=mean, std=std, n=len(means))


@dataclass
class Report:
    """Nested cells plus run provenance."""

    cells: dict  # axis -> subcondition -> dataset -> method -> MetricCell
    provenance: dict  # config_hash, master_seed, tool_version

    def put(self, axis: str, subcondition: str, dataset: str, method: str,
            cell: MetricCell) -> None:
        self.cells.setdefault(axis, {}).setdefault(subcondition, {}) \
            .setdefault(dataset, {})[method] = cell

    def get(self, axis: str, subcondition: str, dataset: str, method: str) -> MetricCell:
        return self.cells[axis][subcondition][dataset][method]

    def rows(self):
        """Flat (axis, subcondition, dataset, method, cell) tuples, key-sorted."""
        for axis in sorted(self.cells):
            for sub in sorted(self.cells[axis]):
                for ds in sorted(self.cells[axis][sub]):
                    for method in sorted(self.cells[axis][sub][ds]):
                        yield axis, sub, ds, method, self.cells[axis][sub][ds][method]

    @property
    def num_cells(self) -> int:
        return sum(1 for _ in self.rows())


def _fmt(x: float | None) -> str:
    # repr round-trips float64 exactly, keeping emission byte-deterministic
    return "" if x is None else repr(float(x))


def emit_report(report: Report, json_path=None, csv_path=None) -> list[Path]:
    """Write the report as nested JSON and/or flat CSV; returns written paths."""
    if report.num_cells == 0:
        raise EmptyInput("refusing to emit an empty report")
    written = []
    if json_path is not None:
        json_path = Path(json_path)
        tree = {
            axis: {
                sub: {
                    ds: {m: cell.as_dict() for m, cell in methods.items()}
                    for ds, methods in datasets.items()
                }
                for sub, datasets in subs.items()
            }
            for axis, subs in report.cells.items()
        }
        payload = {"provenance": report.provenance, "results": tree}
        json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        written.append(json_path)
    if csv_path is not None:
        csv_path = Path(csv_path)
        with open(csv_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["axis", "subcondition", "dataset", "method",
                        "seed_count", "mean", "std", "undefined", "note"])
            for axis, sub, ds, method, cell in report.rows():
                w.writerow([axis, sub, ds, method, cell.n,
                            _fmt(cell.mean), _fmt(cell.std),
                            "true" if cell.undefined else "false", cell.note])
        written.append(csv_path)
    return written


def load_report(json_path) -> Report:
    payload = json.loads(Path(json_path).read_text())
    cells: dict = {}
    for axis, subs in payload["results"].items():
        for sub, datasets in subs.items():
            for ds, methods in datasets.items():
                for method, d in methods.items():
                    cells.setdefault(axis, {}).setdefault(sub, {}) \
                        .setdefault(ds, {})[method] = MetricCell.from_dict(d)
    return Report(cells=cells, provenance=payload.get("provenance", {}))
