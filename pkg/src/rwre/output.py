"""Result tables and deterministic file emission (CSV / JSON / SVG).

CSV is RFC-4180 (CRLF, header row, quoting only when needed) with floats at
17 significant digits; JSON is UTF-8 with stable key order.  Plots are
static SVG rendered without timestamps so identical runs emit identical
bytes; every plot gets a sibling CSV holding exactly the plotted series.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "rwre"
import matplotlib.pyplot as plt  # noqa: E402


@dataclass
class ResultTable:
    """Typed columnar result with a mandatory provenance block."""

    name: str
    columns: list[tuple[str, str]]  # (column name, kind in {"int","float","str"})
    rows: list[tuple] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def add(self, *row) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"row width {len(row)} != {len(self.columns)}")
        self.rows.append(tuple(row))

    def column(self, name: str) -> list:
        i = [c for c, _ in self.columns].index(name)
        return [r[i] for r in self.rows]


def _format_cell(value, kind: str) -> str:
    if value is None:
        return ""
    if kind == "float":
        return format(float(value), ".17g")
    if kind == "int":
        return str(int(value))
    return str(value)


def write_csv(table: ResultTable, path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
        w.writerow([c for c, _ in table.columns])
        for row in table.rows:
            w.writerow([_format_cell(v, k) for v, (_, k) in zip(row, table.columns)])


def write_json(payload: dict, path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=True)
        fh.write("\n")


def line_plot(path: str, series: list[dict], xlabel: str, ylabel: str, title: str,
              logx: bool = False, logy: bool = False) -> None:
    """Static SVG line plot; series items are {label, x, y, [style]}."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for s in series:
        ax.plot(s["x"], s["y"], s.get("style", "-o"), label=s.get("label"), markersize=3)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if any(s.get("label") for s in series):
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def heatmap_plot(path: str, grid, x, y, xlabel: str, ylabel: str, title: str) -> None:
    """Static SVG heatmap for classification rasters."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    im = ax.imshow(
        grid,
        origin="lower",
        extent=(min(x), max(x), min(y), max(y)),
        aspect="auto",
        interpolation="nearest",
    )
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
