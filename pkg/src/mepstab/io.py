"""Atomic file output: path and table CSV, JSON reports and small SVG plots."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import InputError
from .geometry import DiscretePath

__all__ = [
    "SCHEMA_VERSION",
    "atomic_write",
    "format_float",
    "write_path_csv",
    "read_path_csv",
    "write_table_csv",
    "write_json",
    "read_json",
    "line_plot_svg",
]

SCHEMA_VERSION = 1


def atomic_write(target, text: str) -> Path:
    """Write ``text`` to a temporary file in the target directory, then rename it into place."""
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return target


def format_float(x) -> str:
    """Seventeen significant digits, enough to round-trip any double.

    >>> format_float(0.1)
    '0.10000000000000001'
    >>> float(format_float(1 / 3)) == 1 / 3
    True
    """
    return "%.17g" % float(x)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def write_path_csv(path: DiscretePath, target) -> Path:
    header = ["alpha"] + [f"x{k + 1}" for k in range(path.dim)]
    rows = np.column_stack([path.alphas, path.nodes])
    return atomic_write(target, _csv_text(header, rows))


def read_path_csv(source) -> DiscretePath:
    """Read a path file with header ``alpha,x1,...,xN``."""
    with open(source, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{source}: empty path file") from None
        if not header or header[0] != "alpha" or len(header) < 2:
            raise InputError(f"{source}: header must be alpha,x1,...,xN")
        try:
            data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
        except ValueError as exc:
            raise InputError(f"{source}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise InputError(f"{source}: ragged rows")
    return DiscretePath(data[:, 0], data[:, 1:])


def write_table_csv(rows: list, target, columns=None) -> Path:
    """Write a list of dicts with the given (or first-row) column order."""
    if columns is None:
        columns = list(rows[0]) if rows else []
    return atomic_write(target, _csv_text(columns, [[r.get(c, "") for c in columns] for r in rows]))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(obj: dict, target) -> Path:
    """JSON with a ``schema_version`` field; non-finite numbers become null."""
    doc = {"schema_version": SCHEMA_VERSION, **_clean(obj)}
    return atomic_write(target, json.dumps(doc, indent=2, allow_nan=False) + "\n")


def read_json(source) -> dict:
    with open(source, encoding="utf-8") as fh:
        return json.load(fh)


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def line_plot_svg(series: dict, target, title: str = "", xlabel: str = "", ylabel: str = "",
                  logx: bool = False, logy: bool = False, markers: bool = False,
                  width: int = 480, height: int = 360) -> Path:
    """Plot named ``(x, y)`` series as polylines in a standalone SVG."""
    tx = np.log10 if logx else (lambda v: v)
    ty = np.log10 if logy else (lambda v: v)
    prepared = {}
    for name, (x, y) in series.items():
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        if ok.any():
            prepared[name] = (tx(x[ok]), ty(y[ok]))
    m = 50
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    if prepared:
        xs = np.concatenate([p[0] for p in prepared.values()])
        ys = np.concatenate([p[1] for p in prepared.values()])
        x0, x1 = float(xs.min()), float(xs.max())
        y0, y1 = float(ys.min()), float(ys.max())
        x1 = x1 if x1 > x0 else x0 + 1.0
        y1 = y1 if y1 > y0 else y0 + 1.0

        def px(v):
            return m + (v - x0) / (x1 - x0) * (width - 2 * m)

        def py(v):
            return height - m - (v - y0) / (y1 - y0) * (height - 2 * m)

        parts.append(f'<rect x="{m}" y="{m}" width="{width - 2 * m}" height="{height - 2 * m}" '
                     'fill="none" stroke="black"/>')
        for i, (name, (x, y)) in enumerate(prepared.items()):
            c = _COLORS[i % len(_COLORS)]
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
            parts.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
            if markers:
                parts.extend(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2.5" fill="{c}"/>'
                             for a, b in zip(x, y))
            parts.append(f'<text x="{width - m + 4}" y="{m + 14 * (i + 1)}" font-size="11" fill="{c}">'
                         f'{escape(str(name))}</text>')
        fmt = (lambda v, log: f"1e{v:.1f}" if log else f"{v:.3g}")
        parts += [
            f'<text x="{m}" y="{height - m + 14}" font-size="10">{fmt(x0, logx)}</text>',
            f'<text x="{width - m}" y="{height - m + 14}" font-size="10" text-anchor="end">{fmt(x1, logx)}</text>',
            f'<text x="{m - 4}" y="{height - m}" font-size="10" text-anchor="end">{fmt(y0, logy)}</text>',
            f'<text x="{m - 4}" y="{m + 8}" font-size="10" text-anchor="end">{fmt(y1, logy)}</text>',
        ]
    parts += [
        f'<text x="{width / 2}" y="20" font-size="14" text-anchor="middle">{escape(title)}</text>',
        f'<text x="{width / 2}" y="{height - 12}" font-size="11" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{height / 2}" font-size="11" text-anchor="middle" '
        f'transform="rotate(-90 14 {height / 2})">{escape(ylabel)}</text>',
        "</svg>",
    ]
    return atomic_write(target, "\n".join(parts) + "\n")
