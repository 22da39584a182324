"""Dataset loading, synthetic generators and export formats.

Formats
-------
* Embeddings: delimited text, one point per row, ``%.17g`` (lossless).
* Pressure reports: JSON lines, one object per point::

    {"index": 3, "pressure": 0.42, "pressured": true, "method": "EE"}

* Traces: JSON lines, one object per iteration with the keys of
  :class:`~pressure_embed.core.TraceRecord` plus ``mu_change``.
* Plots: SVG.
"""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
from scipy.spatial.distance import cdist

from .core import (
    Dataset,
    Embedding,
    OptimRun,
    PressureReport,
    TraceRecord,
    ValidationError,
    coords_of,
)


class ParseError(ValidationError):
    pass


def load_delimited(path, delimiter=",", has_labels=False) -> Dataset:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split(delimiter) if delimiter else line.split()
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise ParseError(f"{path}: row {lineno} has {len(fields)} fields, expected {width}")
        try:
            rows.append([float(v) for v in fields])
        except ValueError:
            raise ParseError(f"{path}: row {lineno} has a non-numeric field") from None
    if not rows:
        raise ParseError(f"{path}: no data rows")
    arr = np.array(rows)
    if has_labels:
        labels = arr[:, -1]
        if np.any(labels != np.round(labels)):
            raise ParseError(f"{path}: label column is not integer")
        return Dataset(arr[:, :-1], labels.astype(np.int64))
    return Dataset(arr)


def save_delimited(path, points, labels=None, delimiter=","):
    arr = np.asarray(points, dtype=np.float64)
    lines = []
    for i, row in enumerate(arr):
        fields = [f"{v:.17g}" for v in row]
        if labels is not None:
            fields.append(str(int(labels[i])))
        lines.append(delimiter.join(fields))
    _write(path, "".join(line + "\n" for line in lines))


def save_dataset(path, data: Dataset, delimiter=","):
    save_delimited(path, data.points, data.labels, delimiter)


def save_embedding(path, embedding, delimiter=","):
    save_delimited(path, coords_of(embedding), None, delimiter)


def load_embedding(path, delimiter=",") -> Embedding:
    return Embedding(load_delimited(path, delimiter).points)


def save_report(path, report: PressureReport):
    lines = [
        json.dumps({"index": k, "pressure": float(p), "pressured": bool(p > 0),
                    "method": report.method})
        for k, p in enumerate(report.pressure)
    ]
    _write(path, "".join(line + "\n" for line in lines))


def load_report(path) -> PressureReport:
    recs = [json.loads(line) for line in _read_lines(path)]
    recs.sort(key=lambda r: r["index"])
    method = recs[0]["method"] if recs else "EE"
    return PressureReport(np.array([r["pressure"] for r in recs]), method)


def save_trace(path, trace):
    if isinstance(trace, OptimRun):
        trace = trace.trace
    lines = []
    prev_mu = None
    for rec in trace:
        d = asdict(rec)
        d["mu_change"] = prev_mu is not None and rec.mu != prev_mu
        prev_mu = rec.mu
        lines.append(json.dumps(d))
    _write(path, "".join(line + "\n" for line in lines))


def load_trace(path) -> list:
    out = []
    for line in _read_lines(path):
        d = json.loads(line)
        d.pop("mu_change", None)
        out.append(TraceRecord(**d))
    return out


def _read_lines(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    return [line for line in text.splitlines() if line.strip()]


def _write(path, text):
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


# --- generators -----------------------------------------------------------

def generate_swissroll(n=1000, noise=0.0, seed=0, n_bins=6) -> Dataset:
    """Swiss roll ``(t cos t, h, t sin t)``, t in [1.5 pi, 4.5 pi], h in [0, 20]."""
    if n < 10:
        raise ValidationError("swissroll needs n >= 10")
    rng = np.random.default_rng(seed)
    t = rng.uniform(1.5 * np.pi, 4.5 * np.pi, n)
    h = rng.uniform(0.0, 20.0, n)
    pts = np.column_stack([t * np.cos(t), h, t * np.sin(t)])
    if noise > 0:
        pts = pts + noise * rng.standard_normal(pts.shape)
    edges = np.linspace(1.5 * np.pi, 4.5 * np.pi, n_bins + 1)[1:-1]
    return Dataset(pts, np.digitize(t, edges))


def _random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    return q * np.sign(np.diag(r))


def generate_rings(n_objects=10, points_per_ring=72, radius=1.0, separation=1.5, seed=0) -> Dataset:
    """Randomly oriented circles in 3-D with centers at least ``separation`` apart.

    Points are evenly spaced along each ring, like a turntable sequence. A
    candidate ring is also rejected when it passes closer to an earlier ring
    than 1.5 times the spacing of its own points, so that each point's
    nearest neighbors are its two ring neighbors.
    """
    if points_per_ring < 8:
        raise ValidationError("points_per_ring must be at least 8")
    rng = np.random.default_rng(seed)
    theta = 2.0 * np.pi * np.arange(points_per_ring) / points_per_ring
    circle = radius * np.column_stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)])
    clearance = 1.5 * 2.0 * radius * np.sin(np.pi / points_per_ring)
    box = separation * max(1.0, n_objects ** (1.0 / 3.0))
    centers = []
    rings = []
    attempts = 0
    while len(rings) < n_objects:
        c = rng.uniform(0.0, box, 3)
        ring = circle @ _random_rotation(rng).T + c
        attempts += 1
        if attempts % 1000 == 0:
            box *= 1.1
        if any(np.linalg.norm(c - o) < separation for o in centers):
            continue
        if rings and cdist(ring, np.vstack(rings)).min() < clearance:
            continue
        centers.append(c)
        rings.append(ring)
    labels = np.repeat(np.arange(n_objects), points_per_ring)
    return Dataset(np.vstack(rings), labels)


def generate_clusters(n=60, n_clusters=3, dim=5, spread=1.0, separation=5.0, seed=0) -> Dataset:
    rng = np.random.default_rng(seed)
    centers = separation * rng.standard_normal((n_clusters, dim))
    labels = np.arange(n) % n_clusters
    pts = centers[labels] + spread * rng.standard_normal((n, dim))
    return Dataset(pts, labels)


# --- SVG ------------------------------------------------------------------

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _scale(values, lo_px, hi_px):
    lo, hi = float(np.min(values)), float(np.max(values))
    span = hi - lo if hi > lo else 1.0
    return lo_px + (np.asarray(values) - lo) / span * (hi_px - lo_px)


def marker_radii(pressure, base=2.5, extra=6.0):
    """Affine map from pressure to marker radius."""
    p = np.asarray(pressure, dtype=np.float64)
    top = p.max() if p.size and p.max() > 0 else 1.0
    return base + extra * p / top


def render_scatter(embedding, path, report: PressureReport = None, labels=None,
                   size=480, margin=20):
    x = coords_of(embedding)
    if x.shape[1] != 2:
        raise ValidationError(f"scatter plots need a 2-D embedding, got d={x.shape[1]}")
    n = x.shape[0]
    px = _scale(x[:, 0], margin, size - margin)
    py = _scale(x[:, 1], size - margin, margin)
    radii = marker_radii(report.pressure) if report is not None else np.full(n, 2.5)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    # draw large markers first so small ones stay visible
    for i in np.argsort(-radii, kind="stable"):
        color = PALETTE[int(labels[i]) % len(PALETTE)] if labels is not None else PALETTE[0]
        parts.append(
            f'<circle cx="{px[i]:.3f}" cy="{py[i]:.3f}" r="{radii[i]:.3f}" '
            f'fill="{color}" fill-opacity="0.8" data-index="{i}"/>'
        )
    parts.append("</svg>")
    _write(path, "\n".join(parts) + "\n")


def render_trace(trace, path, width=640, height=400, margin=40):
    """Objective and pressured fraction against iteration; circles mark mu changes."""
    if isinstance(trace, OptimRun):
        trace = trace.trace
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if trace:
        it = np.array([r.iter for r in trace], dtype=float)
        obj = np.array([r.objective for r in trace])
        frac = np.array([r.pressured_fraction for r in trace])
        mid = height / 2
        xs = _scale(it, margin, width - margin)
        ys = _scale(obj, mid - 10, margin)
        fs = height - margin - frac * (mid - margin - 10)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, ys))
        parts.append(f'<polyline class="objective" fill="none" stroke="black" points="{pts}"/>')
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, fs))
        parts.append(f'<polyline class="fraction" fill="none" stroke="green" points="{pts}"/>')
        for i in range(1, len(trace)):
            if trace[i].mu != trace[i - 1].mu:
                parts.append(
                    f'<circle class="mu-change" cx="{xs[i]:.2f}" cy="{ys[i]:.2f}" r="4" '
                    f'fill="none" stroke="red"/>'
                )
        parts.append(
            f'<text x="{margin}" y="{margin - 10}" font-size="12">'
            f'{escape(f"objective {obj[-1]:.6g} after {len(trace)} iterations")}</text>'
        )
    parts.append("</svg>")
    _write(path, "\n".join(parts) + "\n")
