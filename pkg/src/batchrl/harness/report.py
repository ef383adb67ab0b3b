"""CSV artifacts and their SVG rendering.

Every CSV written by the CLI starts with ``# key=value ...`` comment lines
carrying the config hash, environment, reward and series label, followed by a
header row and numeric data rows. ``emit_report`` turns a set of such files
into one standalone SVG 1.1 chart per metric column.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from ..errors import ReportError

LOSS_COLUMNS = ("step", "critic_loss", "actor_loss", "aux_loss")
EVAL_COLUMNS = ("episode", "return", "closest_distance")
COVERAGE_COLUMNS = ("dims", "bin", "count")

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
WIDTH, HEIGHT = 640, 400
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 150, 40, 50


def format_number(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    return repr(value)


def format_meta(meta):
    """``# key=value`` line; keys sorted so the bytes do not depend on insertion order."""
    parts = []
    for key in sorted(meta):
        value = meta[key]
        if value is None:
            continue
        text = str(value)
        if any(c.isspace() for c in text) or "=" in text:
            raise ReportError(f"metadata value for {key!r} must not contain whitespace or '='")
        parts.append(f"{key}={text}")
    return "# " + " ".join(parts) + "\n"


def write_csv(path, meta, columns, rows):
    buf = io.StringIO()
    buf.write(format_meta(meta))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else format_number(v) for v in row])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())
    return path


@dataclass
class CsvTable:
    path: str
    meta: dict
    header: list
    values: np.ndarray  # (rows, columns) float64, NaN for empty cells

    @property
    def kind(self):
        if tuple(self.header) == EVAL_COLUMNS:
            return "eval"
        if tuple(self.header) == COVERAGE_COLUMNS:
            return "coverage"
        return "series"

    @property
    def label(self):
        return self.meta.get("label") or os.path.splitext(os.path.basename(self.path))[0]

    def column(self, name):
        return self.values[:, self.header.index(name)]


def read_csv_table(path):
    """Parse one artifact CSV. Errors name the offending line."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    meta, header, rows = {}, None, []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            if header is not None:
                raise ReportError(f"{path}:{lineno}: metadata line after the header")
            for token in line[1:].split():
                key, sep, value = token.partition("=")
                if not sep or not key:
                    raise ReportError(f"{path}:{lineno}: malformed metadata token {token!r}")
                meta[key] = value
            continue
        fields = next(csv.reader([line]))
        if header is None:
            if not fields or any(not f.strip() for f in fields):
                raise ReportError(f"{path}:{lineno}: malformed header row")
            header = [f.strip() for f in fields]
            continue
        if len(fields) != len(header):
            raise ReportError(f"{path}:{lineno}: expected {len(header)} fields, found {len(fields)}")
        row = []
        for f in fields:
            f = f.strip()
            if f == "":
                row.append(math.nan)
                continue
            try:
                row.append(float(f))
            except ValueError:
                if tuple(header) == COVERAGE_COLUMNS:
                    row.append(math.nan)
                    continue
                raise ReportError(f"{path}:{lineno}: non-numeric value {f!r}") from None
        rows.append(row)
    if header is None:
        raise ReportError(f"{path}: no header row")
    if not rows:
        raise ReportError(f"{path}: no data rows")
    return CsvTable(os.fspath(path), meta, header, np.asarray(rows, dtype=np.float64))


@dataclass
class SeriesSummary:
    """Aggregate of one labelled series over its runs (seeds)."""

    x: np.ndarray
    mean: np.ndarray
    low: np.ndarray
    high: np.ndarray
    runs: int


@dataclass
class ReportResult:
    files: list = field(default_factory=list)
    summaries: dict = field(default_factory=dict)  # metric -> label -> SeriesSummary


def _check_consistent(tables):
    for key in ("env", "reward"):
        values = {t.meta[key] for t in tables if key in t.meta}
        if len(values) > 1:
            raise ReportError(f"refusing to aggregate CSVs with different {key} fields: {sorted(values)}")
    kinds = {t.kind for t in tables}
    if len(kinds) > 1:
        raise ReportError(f"cannot mix CSV kinds in one report: {sorted(kinds)}")
    if kinds == {"coverage"}:
        raise ReportError("coverage histograms are not charted; pass loss or eval CSVs")
    headers = {tuple(t.header) for t in tables}
    if len(headers) > 1:
        raise ReportError("input CSVs have different header rows")


def _group(tables):
    groups = {}
    for t in tables:
        groups.setdefault(t.label, []).append(t)
    return groups


def aggregate_series(tables, metric):
    """Mean and min/max across runs at the x values every run logged with a finite value."""
    xname = tables[0].header[0]
    per_run = []
    for t in tables:
        x, y = t.column(xname), t.column(metric)
        ok = np.isfinite(x) & np.isfinite(y)
        per_run.append(dict(zip(x[ok].tolist(), y[ok].tolist())))
    common = sorted(set.intersection(*(set(d) for d in per_run)))
    if not common:
        return None
    ys = np.array([[d[x] for x in common] for d in per_run])
    return SeriesSummary(np.asarray(common), ys.mean(axis=0), ys.min(axis=0), ys.max(axis=0), len(tables))


def aggregate_bars(tables, metric):
    """Per-run mean of ``metric``; bar = mean over runs, whisker = min/max over runs."""
    run_means = []
    for t in tables:
        y = t.column(metric)
        y = y[np.isfinite(y)]
        if y.size:
            run_means.append(float(y.mean()))
    if not run_means:
        return None
    r = np.asarray(run_means)
    return SeriesSummary(np.zeros(1), np.array([r.mean()]), np.array([r.min()]), np.array([r.max()]), len(r))


class _Frame:
    """Linear map from data space to the plot rectangle."""

    def __init__(self, xlo, xhi, ylo, yhi):
        if xhi <= xlo:
            xlo, xhi = xlo - 0.5, xhi + 0.5
        if yhi <= ylo:
            pad = abs(ylo) * 0.05 or 0.5
            ylo, yhi = ylo - pad, yhi + pad
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi
        self.left, self.right = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
        self.top, self.bottom = MARGIN_TOP, HEIGHT - MARGIN_BOTTOM

    def px(self, x):
        return self.left + (x - self.xlo) / (self.xhi - self.xlo) * (self.right - self.left)

    def py(self, y):
        return self.bottom - (y - self.ylo) / (self.yhi - self.ylo) * (self.bottom - self.top)


def _points(xs, ys, frame):
    return " ".join(f"{frame.px(x):.2f},{frame.py(y):.2f}" for x, y in zip(xs, ys))


def _svg_open(title):
    return [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<!DOCTYPE svg PUBLIC "-//W3C//DTD SVG 1.1//EN" "http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd">',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
    ]


def _axes(frame, xlabel, ylabel, xticks=True):
    out = [
        f'<line x1="{frame.left}" y1="{frame.bottom}" x2="{frame.right}" y2="{frame.bottom}" stroke="#000000"/>',
        f'<line x1="{frame.left}" y1="{frame.top}" x2="{frame.left}" y2="{frame.bottom}" stroke="#000000"/>',
    ]
    for y in np.linspace(frame.ylo, frame.yhi, 5):
        py = frame.py(y)
        out.append(f'<line x1="{frame.left - 4}" y1="{py:.2f}" x2="{frame.left}" y2="{py:.2f}" stroke="#000000"/>')
        out.append(
            f'<text x="{frame.left - 6}" y="{py + 4:.2f}" text-anchor="end" font-family="sans-serif" font-size="10">{y:.4g}</text>'
        )
    if xticks:
        for x in np.linspace(frame.xlo, frame.xhi, 5):
            px = frame.px(x)
            out.append(f'<line x1="{px:.2f}" y1="{frame.bottom}" x2="{px:.2f}" y2="{frame.bottom + 4}" stroke="#000000"/>')
            out.append(
                f'<text x="{px:.2f}" y="{frame.bottom + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{x:.4g}</text>'
            )
    out.append(
        f'<text x="{(frame.left + frame.right) / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{escape(xlabel)}</text>'
    )
    cy = (frame.top + frame.bottom) / 2
    out.append(
        f'<text x="16" y="{cy:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {cy:.1f})">{escape(ylabel)}</text>'
    )
    return out


def _legend(labels):
    out = []
    x0 = WIDTH - MARGIN_RIGHT + 15
    for i, label in enumerate(labels):
        y = MARGIN_TOP + 10 + 18 * i
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<rect x="{x0}" y="{y - 8}" width="12" height="10" fill="{color}"/>')
        out.append(f'<text x="{x0 + 18}" y="{y + 1}" font-family="sans-serif" font-size="11">{escape(label)}</text>')
    return out


def render_line_chart(metric, xlabel, summaries):
    allx = np.concatenate([s.x for s in summaries.values()])
    ally = np.concatenate([np.concatenate([s.low, s.high]) for s in summaries.values()])
    frame = _Frame(float(allx.min()), float(allx.max()), float(ally.min()), float(ally.max()))
    out = _svg_open(metric) + _axes(frame, xlabel, metric)
    for i, (label, s) in enumerate(summaries.items()):
        color = PALETTE[i % len(PALETTE)]
        if s.runs > 1:
            ring = _points(np.concatenate([s.x, s.x[::-1]]), np.concatenate([s.high, s.low[::-1]]), frame)
            out.append(f'<polygon class="band" data-series={quoteattr(label)} points="{ring}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        out.append(
            f'<polyline class="mean" data-series={quoteattr(label)} points="{_points(s.x, s.mean, frame)}" '
            f'fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
    out += _legend(list(summaries))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_bar_chart(metric, summaries):
    labels = list(summaries)
    lo = min(0.0, min(float(s.low[0]) for s in summaries.values()))
    hi = max(0.0, max(float(s.high[0]) for s in summaries.values()))
    frame = _Frame(0.0, float(len(labels)), lo, hi)
    out = _svg_open(metric) + _axes(frame, "method", metric, xticks=False)
    slot = (frame.right - frame.left) / len(labels)
    zero = frame.py(0.0)
    for i, label in enumerate(labels):
        s = summaries[label]
        color = PALETTE[i % len(PALETTE)]
        cx = frame.left + slot * (i + 0.5)
        top = frame.py(float(s.mean[0]))
        y, h = min(top, zero), abs(zero - top)
        out.append(
            f'<rect class="bar" data-series={quoteattr(label)} x="{cx - slot * 0.3:.2f}" y="{y:.2f}" '
            f'width="{slot * 0.6:.2f}" height="{h:.2f}" fill="{color}"/>'
        )
        if s.runs > 1:
            out.append(
                f'<line class="range" x1="{cx:.2f}" y1="{frame.py(float(s.low[0])):.2f}" x2="{cx:.2f}" '
                f'y2="{frame.py(float(s.high[0])):.2f}" stroke="#000000"/>'
            )
        out.append(
            f'<text x="{cx:.2f}" y="{frame.bottom + 16}" text-anchor="middle" font-family="sans-serif" font-size="11">{escape(label)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def build_report(paths):
    """Parse and aggregate without writing; returns (svg texts by metric, ReportResult)."""
    if not paths:
        raise ReportError("no input CSVs")
    tables = [read_csv_table(p) for p in paths]
    _check_consistent(tables)
    groups = _group(tables)
    header = tables[0].header
    svgs, result = {}, ReportResult()
    for metric in header[1:]:
        if tables[0].kind == "eval":
            summaries = {label: aggregate_bars(ts, metric) for label, ts in groups.items()}
        else:
            summaries = {label: aggregate_series(ts, metric) for label, ts in groups.items()}
        summaries = {k: v for k, v in summaries.items() if v is not None}
        if not summaries:
            continue
        result.summaries[metric] = summaries
        if tables[0].kind == "eval":
            svgs[metric] = render_bar_chart(metric, summaries)
        else:
            svgs[metric] = render_line_chart(metric, header[0], summaries)
    if not svgs:
        raise ReportError("no finite values to chart")
    return svgs, result


def emit_report(paths, out_dir):
    """Write ``<metric>.svg`` into ``out_dir`` for every metric with data. Nothing is written on error."""
    svgs, result = build_report(paths)
    os.makedirs(out_dir, exist_ok=True)
    for metric, text in svgs.items():
        path = os.path.join(out_dir, f"{metric}.svg")
        with open(path, "w") as fh:
            fh.write(text)
        result.files.append(path)
    return result
