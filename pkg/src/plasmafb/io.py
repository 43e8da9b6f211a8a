"""Flat-file artifacts: field and trace CSV, JSON reports, SVG and PGM plots.

Every writer goes through :func:`atomic_write`, which writes a temporary
file in the target directory and renames it into place.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .grid import EXTERIOR, Grid

__all__ = [
    "atomic_write",
    "write_field_csv",
    "read_field_csv",
    "write_table_csv",
    "write_json",
    "svg_heatmap",
    "svg_curves",
    "write_pgm",
]

FIELD_HEADER = ["x", "y", "u"]


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write(path: str | Path, data: str | bytes) -> None:
    """Write to a temporary sibling, then rename over ``path``."""
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def write_field_csv(grid: Grid, u: np.ndarray, path: str | Path) -> None:
    """Rows ``x,y,u`` in row-major node order, exterior nodes omitted."""
    u = grid.check(u)
    X, Y = grid.coords
    keep = grid.mask != EXTERIOR
    lines = [",".join(FIELD_HEADER)]
    for x, y, v in zip(X[keep], Y[keep], u[keep]):
        lines.append(f"{_g17(x)},{_g17(y)},{_g17(v)}")
    atomic_write(path, "\n".join(lines) + "\n")


def read_field_csv(grid: Grid, path: str | Path) -> np.ndarray:
    """Inverse of :func:`write_field_csv`; the node set must match ``grid``."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read field file {path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != FIELD_HEADER:
        raise SchemaError(f"{path}: expected header {','.join(FIELD_HEADER)}")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric entry ({exc})") from exc
    keep = grid.mask != EXTERIOR
    if data.ndim != 2 or data.shape != (int(keep.sum()), 3):
        raise SchemaError(
            f"{path}: {len(rows) - 1} rows do not match the {int(keep.sum())} grid nodes"
        )
    X, Y = grid.coords
    tol = 1e-9 * grid.h
    if np.abs(data[:, 0] - X[keep]).max() > tol or np.abs(data[:, 1] - Y[keep]).max() > tol:
        raise SchemaError(f"{path}: node coordinates do not match the grid")
    u = np.zeros((grid.n, grid.n))
    u[keep] = data[:, 2]
    return u


def write_table_csv(rows: list[dict], path: str | Path, columns: list[str] | None = None) -> None:
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_g17(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    atomic_write(path, buf.getvalue())


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(obj, path: str | Path) -> None:
    """Sorted-key JSON; non-finite numbers are written as ``null``."""
    text = json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False)
    atomic_write(path, text + "\n")


def _color(t: float) -> str:
    # blue -> white -> red
    t = min(max(t, 0.0), 1.0)
    if t < 0.5:
        s = t / 0.5
        rgb = (int(40 + 215 * s), int(70 + 185 * s), 255)
    else:
        s = (t - 0.5) / 0.5
        rgb = (255, int(255 - 200 * s), int(255 - 215 * s))
    return "#%02x%02x%02x" % rgb


def svg_heatmap(grid: Grid, u: np.ndarray, polylines=(), size: int = 512, levels: int = 48) -> str:
    """Heatmap of ``u`` over the domain with polylines overlaid.

    Colors are quantized to ``levels`` steps and equal runs along each
    lattice row merged into one rectangle, keeping the file small.
    """
    u = grid.check(u)
    n = grid.n
    px = size / n
    lo, hi = float(u.min()), float(u.max())
    span = hi - lo if hi > lo else 1.0
    q = np.floor((u - lo) / span * (levels - 1) + 0.5).astype(int)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="#dddddd"/>',
    ]
    # screen rows run over y (top = max y), columns over x
    for j in range(n - 1, -1, -1):
        row_y = (n - 1 - j) * px
        i = 0
        while i < n:
            if grid.mask[i, j] == EXTERIOR:
                i += 1
                continue
            k = i
            while k + 1 < n and grid.mask[k + 1, j] != EXTERIOR and q[k + 1, j] == q[i, j]:
                k += 1
            fill = _color(q[i, j] / (levels - 1))
            out.append(
                f'<rect x="{i * px:.2f}" y="{row_y:.2f}" width="{(k - i + 1) * px:.2f}" '
                f'height="{px:.2f}" fill="{fill}"/>'
            )
            i = k + 1
    for line in polylines:
        pts = " ".join(
            f"{((x - grid.origin) / grid.h + 0.5) * px:.2f},"
            f"{(n - 0.5 - (y - grid.origin) / grid.h) * px:.2f}"
            for x, y in line
        )
        out.append(f'<polyline points="{pts}" fill="none" stroke="#000000" stroke-width="1.5"/>')
    out.append(f"<title>u in [{lo:.6g}, {hi:.6g}]</title>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def svg_curves(series: list[tuple[str, np.ndarray, np.ndarray]], xlabel: str, ylabel: str,
               width: int = 560, height: int = 400) -> str:
    """Line chart of ``(label, x, y)`` series with labelled min/max ticks."""
    pad = 60
    xs = np.concatenate([s[1] for s in series]) if series else np.array([0.0, 1.0])
    ys = np.concatenate([s[2] for s in series]) if series else np.array([0.0, 1.0])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    ymargin = 0.05 * (y1 - y0)
    y0, y1 = y0 - ymargin, y1 + ymargin

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="#000"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="#000"/>',
        f'<text x="{width / 2}" y="{height - 15}" text-anchor="middle">{xlabel}</text>',
        f'<text x="15" y="{height / 2}" transform="rotate(-90 15 {height / 2})" '
        f'text-anchor="middle">{ylabel}</text>',
    ]
    for v in (x0, x1):
        out.append(f'<text x="{sx(v):.1f}" y="{height - pad + 18}" text-anchor="middle" '
                   f'font-size="11">{v:.4g}</text>')
    for v in (y0, y1):
        out.append(f'<text x="{pad - 5}" y="{sy(v):.1f}" text-anchor="end" '
                   f'font-size="11">{v:.4g}</text>')
    for k, (label, x, y) in enumerate(series):
        color = palette[k % len(palette)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y) if math.isfinite(b))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for a, b in zip(x, y):
            out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="3" fill="{color}"/>')
        out.append(f'<text x="{width - pad + 5}" y="{pad + 15 * k}" font-size="11" '
                   f'fill="{color}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_pgm(values: np.ndarray, path: str | Path) -> None:
    """Binary 8-bit PGM of a 2-D array (first axis horizontal, top = max y)."""
    v = np.asarray(values, dtype=float)
    lo, hi = float(np.nanmin(v)), float(np.nanmax(v))
    span = hi - lo if hi > lo else 1.0
    img = np.round((v - lo) / span * 255.0).astype(np.uint8).T[::-1]
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    atomic_write(path, header + img.tobytes())
