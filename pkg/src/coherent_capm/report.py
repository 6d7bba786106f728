"""Plain-text and CSV rendering of report tables."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


def fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, (bool, np.bool_)):
        return "yes" if v else "no"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if v == 0.0:
            v = 0.0  # drop the sign of negative zero
        return f"{v:.10g}"
    return str(v)


@dataclass
class Table:
    title: str
    columns: list
    rows: list = field(default_factory=list)

    def add(self, *values):
        self.rows.append([fmt(v) for v in values])


def kv_table(title: str, pairs) -> Table:
    t = Table(title, ["key", "value"])
    for k, v in pairs:
        t.add(k, v)
    return t


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def render_text(tables) -> str:
    out = []
    for t in tables:
        cells = [t.columns] + t.rows
        widths = [max(len(r[j]) for r in cells) for j in range(len(t.columns))]
        out.append(f"== {t.title}")
        for i, row in enumerate(cells):
            parts = []
            for j, cell in enumerate(row):
                numeric = i > 0 and _is_number(cell)
                parts.append(cell.rjust(widths[j]) if numeric else cell.ljust(widths[j]))
            out.append("  ".join(parts).rstrip())
        out.append("")
    return "\n".join(out)


def render_csv(tables) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for i, t in enumerate(tables):
        if i:
            buf.write("\n")
        buf.write(f"# {t.title}\n")
        w.writerow(t.columns)
        w.writerows(t.rows)
    return buf.getvalue()
