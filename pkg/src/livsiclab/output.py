"""Canonical writers: JSON with fixed float formatting, CSV, standalone SVG."""

from __future__ import annotations

import csv
import hashlib
import io
import math
from pathlib import Path

import numpy as np

FLOAT_DIGITS = 17


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, f".{FLOAT_DIGITS}g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj, indent: int, level: int, out: list) -> None:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(float(obj)))
    elif isinstance(obj, str):
        import json
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            out.append(("," if i else "") + pad)
            _encode(str(k), indent, level + 1, out)
            out.append(": ")
            _encode(v, indent, level + 1, out)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        flat = all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq)
        if flat:
            parts = []
            for v in seq:
                buf: list = []
                _encode(v, indent, level + 1, buf)
                parts.append("".join(buf))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[")
        for i, v in enumerate(seq):
            out.append(("," if i else "") + pad)
            _encode(v, indent, level + 1, out)
        out.append(end + "]")
    elif hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        _encode(obj.value, indent, level, out)
    else:
        raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent: int = 1) -> str:
    """Deterministic JSON: insertion-ordered keys, floats at 17 significant digits."""
    out: list = []
    _encode(obj, indent, 0, out)
    return "".join(out) + "\n"


def write_json(path, obj) -> str:
    text = dumps(obj)
    Path(path).write_text(text, encoding="utf-8")
    return sha256_text(text)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt_float(v) if isinstance(v, float) else v for v in r])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def _color(t: float) -> str:
    # blue -> white -> red
    t = min(max(t, 0.0), 1.0)
    if t < 0.5:
        u = t / 0.5
        r, g, b = int(255 * u), int(255 * u), 255
    else:
        u = (t - 0.5) / 0.5
        r, g, b = 255, int(255 * (1 - u)), int(255 * (1 - u))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(values: np.ndarray, title: str = "", cell: int = 12) -> str:
    """Grid values as a heat map; NaN cells are drawn grey.  Row index is x1."""
    R = values.shape[0]
    finite = values[np.isfinite(values)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = hi - lo or 1.0
    w = R * cell
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w + 20}" height="{w + 50}" '
             f'viewBox="0 0 {w + 20} {w + 50}">',
             f'<text x="10" y="18" font-family="monospace" font-size="12">{_esc(title)} '
             f'[{lo:.4g}, {hi:.4g}]</text>']
    for i in range(R):
        for j in range(R):
            v = values[i, j]
            fill = "#999999" if not np.isfinite(v) else _color((v - lo) / span)
            # x2 increases upward
            parts.append(f'<rect x="{10 + i * cell}" y="{30 + (R - 1 - j) * cell}" width="{cell}" '
                         f'height="{cell}" fill="{fill}"/>')
    parts.append("</svg>\n")
    return "\n".join(parts)


def histogram_svg(z: np.ndarray, title: str = "", bins: int = 60, width: int = 480, height: int = 300) -> str:
    """Normalized histogram of ``z`` against the standard normal density."""
    edges = np.linspace(-4.0, 4.0, bins + 1)
    dens, _ = np.histogram(z, bins=edges, density=False)
    dens = dens / (len(z) * (edges[1] - edges[0]))
    top = max(float(dens.max()), 1.0 / math.sqrt(2 * math.pi)) * 1.1
    sx = width / 8.0
    sy = (height - 40) / top
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<text x="8" y="16" font-family="monospace" font-size="12">{_esc(title)}</text>']
    base = height - 10
    for i in range(bins):
        x = (edges[i] + 4.0) * sx
        h = dens[i] * sy
        parts.append(f'<rect x="{x:.2f}" y="{base - h:.2f}" width="{sx * (edges[1] - edges[0]):.2f}" '
                     f'height="{h:.2f}" fill="#88aadd" stroke="#335588" stroke-width="0.5"/>')
    xs = np.linspace(-4.0, 4.0, 161)
    pts = " ".join(f"{(x + 4.0) * sx:.2f},{base - math.exp(-x * x / 2) / math.sqrt(2 * math.pi) * sy:.2f}" for x in xs)
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#cc2222" stroke-width="1.5"/>')
    parts.append("</svg>\n")
    return "\n".join(parts)


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
