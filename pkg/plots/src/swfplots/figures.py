"""Render figure analogs from sweep output files.

Consumes only the sweep index (index.json) and per-cell trace CSVs written by
the experiment harness; nothing is recomputed.  Three figure kinds:

* ``t`` - regret versus horizon (log-scaled T axis), optionally normalized
  by sqrt(T);
* ``q`` - regret versus the power parameter;
* ``k`` - regret versus the number of resources per round.

Each cell contributes the final cumulative regret of every seed; a figure
shows the per-seed mean line with a min-max band, one series per value of
the other swept parameter.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

CSV_HEADER = "t,regret_inst,regret_cum,welfare_opt,welfare_t,W_lo,W_hi,seed"
SCHEMA_VERSION = 1

Kind = Literal["t", "q", "k"]
Norm = Literal["raw", "sqrt"]

_AXIS_FIELD = {"t": "T", "q": "q", "k": "k"}
_LABEL = {"t": "horizon T", "q": "power parameter q", "k": "resources per round k"}


class SchemaError(ValueError):
    """Sweep files do not match the expected schema."""


@dataclass(frozen=True)
class FigureSpec:
    index: Path
    kind: Kind
    norm: Norm = "raw"
    out: Path = Path("figure.png")

    def __post_init__(self):
        if self.kind not in _AXIS_FIELD:
            raise ValueError(f"kind must be one of t, q, k, got {self.kind!r}")
        if self.norm not in ("raw", "sqrt"):
            raise ValueError(f"norm must be raw or sqrt, got {self.norm!r}")
        object.__setattr__(self, "index", Path(self.index))
        object.__setattr__(self, "out", Path(self.out))


def final_regrets(csv_path: Path) -> dict[int, float]:
    """Final cumulative regret per seed from one cell CSV."""
    finals: dict[int, float] = {}
    with open(csv_path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise SchemaError(f"{csv_path}: unexpected CSV header {header!r}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            finals[int(parts[7])] = float(parts[2])
    if not finals:
        raise SchemaError(f"{csv_path}: no trace rows")
    return finals


def _q_sort_key(value):
    if value == "-inf":
        return (-math.inf, "")
    if isinstance(value, str):
        return (math.inf, value)
    return (float(value), "")


def _axis_value(cell: dict, field: str):
    if field not in cell:
        raise SchemaError(f"cell {cell.get('path')!r} lacks field {field!r}")
    return cell[field]


def load_series(spec: FigureSpec) -> dict:
    """Group the sweep cells into plot series for the requested kind."""
    index = json.loads(spec.index.read_text())
    if index.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(
            f"{spec.index}: schema_version {index.get('schema_version')!r}, "
            f"expected {SCHEMA_VERSION}")
    cells = index.get("cells", [])
    if not cells:
        raise SchemaError(f"{spec.index}: empty sweep")
    base = spec.index.parent
    x_field = _AXIS_FIELD[spec.kind]
    group_fields = [f for f in ("T", "q", "k") if f != x_field]

    series: dict = {}
    for cell in cells:
        x = _axis_value(cell, x_field)
        key = tuple((f, cell.get(f)) for f in group_fields
                    if _varies(cells, f))
        finals = final_regrets(base / cell["path"])
        values = np.array(sorted(finals.values()))
        if spec.norm == "sqrt":
            values = values / math.sqrt(cell["T"])
        series.setdefault(key, []).append((x, values))
    for key in series:
        series[key].sort(key=lambda item: _q_sort_key(item[0]))
    return series


def _varies(cells, field) -> bool:
    return len({json.dumps(c.get(field)) for c in cells}) > 1


def _positions(xs):
    """Numeric positions for the x values; '-inf' becomes a labeled slot."""
    if all(isinstance(x, (int, float)) for x in xs):
        return list(map(float, xs)), None
    return list(range(len(xs))), [str(x) for x in xs]


def render(spec: FigureSpec) -> dict:
    """Render one figure; returns a summary of what was drawn."""
    series = load_series(spec)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    summary = {"path": str(spec.out), "series": [], "kind": spec.kind,
               "norm": spec.norm}
    for key, points in sorted(series.items(), key=lambda kv: repr(kv[0])):
        xs = [p[0] for p in points]
        pos, labels = _positions(xs)
        means = [float(v.mean()) for _, v in points]
        lows = [float(v.min()) for _, v in points]
        highs = [float(v.max()) for _, v in points]
        label = ", ".join(f"{f}={v}" for f, v in key) if key else "sweep"
        ax.plot(pos, means, marker="o", label=label)
        ax.fill_between(pos, lows, highs, alpha=0.2)
        if labels is not None:
            ax.set_xticks(pos, labels)
        summary["series"].append({"label": label, "x": xs, "mean": means,
                                  "min": lows, "max": highs})
    if spec.kind == "t":
        ax.set_xscale("log")
    ax.set_xlabel(_LABEL[spec.kind])
    ax.set_ylabel("cumulative regret" +
                  (" / sqrt(T)" if spec.norm == "sqrt" else ""))
    ax.legend(fontsize=8)
    fig.tight_layout()
    spec.out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out, dpi=150, format="png")
    plt.close(fig)
    return summary
