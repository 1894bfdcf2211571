"""File formats: instance and tour JSON documents, CSV tables, SVG plots.

JSON floats are written with Python's shortest round-trip representation,
so reading a document back yields bit-identical doubles.  Every write goes
through a temporary file and an atomic rename.
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

from .errors import ParameterError
from .geometry import CitySelection, Instance, build_city_grid

SCHEMA_VERSION = 1


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-ready builtins."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=1, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    atomic_write(path, dumps(obj))


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# instances


def instance_to_dict(inst: Instance) -> dict:
    sel = inst.selection
    doc = {
        "schema_version": SCHEMA_VERSION,
        "process": {"kind": inst.process, "n": inst.n},
        "seed": inst.seed,
        "density": inst.density,
        "nodes": inst.nodes,
        "city_of": inst.city_of,
    }
    if sel is not None:
        doc.update(r=sel.r, s=sel.s, N=sel.N, selected_cities=sel.lattice_coords)
    return doc


def instance_from_dict(doc: dict) -> Instance:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ParameterError(f"unsupported instance schema version {doc.get('schema_version')!r}")
    sel = None
    if "selected_cities" in doc:
        grid = build_city_grid(float(doc["r"]), float(doc["s"]))
        sel = CitySelection.from_lattice(grid, [(int(i), int(j)) for i, j in doc["selected_cities"]])
        if sel.N != int(doc["N"]):
            raise ParameterError("N does not match the number of selected cities")
    nodes = np.array(doc["nodes"], dtype=float).reshape(-1, 2)
    proc = doc["process"]
    inst = Instance(nodes, np.array(doc["city_of"], dtype=np.int64), proc["kind"], proc["n"],
                    int(doc["seed"]), sel, doc.get("density", "uniform"))
    if not inst.contained():
        raise ParameterError("instance nodes fall outside their cities")
    return inst


def read_instance(path) -> Instance:
    return instance_from_dict(read_json(path))


# ---------------------------------------------------------------------------
# tours


def tour_to_dict(tour, method: str, certificate=None, trace=None, extra=None) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "method": method, "order": tour.order, "length": tour.length}
    if certificate is not None:
        doc["certificate"] = {"a": certificate.a, "b": certificate.b, "c": certificate.c, "bound": certificate.bound}
    if trace is not None:
        doc["merge_trace"] = trace_to_dict(trace)
    if extra:
        doc.update(extra)
    return doc


def trace_to_dict(trace) -> dict:
    return {
        "order_of_merging": trace.order_of_merging,
        "initial_length": trace.initial_length,
        "adjacent_only": trace.adjacent_only,
        "max_prior_removals": trace.max_prior_removals,
        "removed_edges": {str(k): v for k, v in sorted(trace.removed_edges.items())},
        "steps": [
            {
                "city": st.city,
                "anchor": st.anchor,
                "removed": st.removed,
                "cross": st.cross,
                "length_after": st.length_after,
            }
            for st in trace.steps
        ],
    }


# ---------------------------------------------------------------------------
# tables


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    atomic_write(path, csv_text(header, rows))


# ---------------------------------------------------------------------------
# plots


_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def svg_plot(series, xlabel: str, ylabel: str, title: str = "", width: int = 640, height: int = 420) -> str:
    """Dependency-free line plot.

    ``series`` is a list of ``(label, xs, ys, band)`` where ``band`` is a list
    of half-widths drawn as a shaded region (or ``None``).
    """
    ml, mr, mt, mb = 70, 20, 40, 50
    xs_all, ys_all = [], []
    for _, xs, ys, band in series:
        xs_all += list(xs)
        b = band if band is not None else [0.0] * len(ys)
        ys_all += [y - e for y, e in zip(ys, b)] + [y + e for y, e in zip(ys, b)]
    if not xs_all:
        raise ParameterError("nothing to plot")
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return ml + (x - x0) / (x1 - x0) * (width - ml - mr)

    def py(y):
        return height - mb - (y - y0) / (y1 - y0) * (height - mt - mb)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>',
        f'<text x="{(width + ml) / 2:.1f}" y="{height - 12}" text-anchor="middle">{xlabel}</text>',
        f'<text x="16" y="{(height - mb + mt) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(height - mb + mt) / 2:.1f})">{ylabel}</text>',
    ]
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle">{title}</text>')
    for t in range(5):
        yv = y0 + t * (y1 - y0) / 4
        xv = x0 + t * (x1 - x0) / 4
        out.append(f'<text x="{ml - 6}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.4g}</text>')
        out.append(f'<text x="{px(xv):.1f}" y="{height - mb + 16}" text-anchor="middle">{xv:.4g}</text>')
    for i, (label, xs, ys, band) in enumerate(series):
        colour = _COLOURS[i % len(_COLOURS)]
        if band is not None:
            upper = [f"{px(x):.2f},{py(y + e):.2f}" for x, y, e in zip(xs, ys, band)]
            lower = [f"{px(x):.2f},{py(y - e):.2f}" for x, y, e in zip(xs, ys, band)]
            out.append(f'<polygon points="{" ".join(upper + lower[::-1])}" fill="{colour}" fill-opacity="0.2"/>')
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="2"/>')
        for x, y in zip(xs, ys):
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{colour}"/>')
        out.append(f'<text x="{width - mr - 150}" y="{mt + 16 * (i + 1)}" fill="{colour}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
