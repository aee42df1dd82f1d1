"""JSON descriptors and deterministic CSV/JSON writers."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import InputError
from .space import DiscreteSpace, WeightedLine, discretize, weight

SCHEMA = "harmonic-mvp/1"


def _load(obj):
    """Accept a dict, a JSON string or a path to a JSON file."""
    if isinstance(obj, Mapping):
        return dict(obj)
    if isinstance(obj, (str, Path)):
        p = Path(obj)
        if p.suffix == ".json" or p.exists():
            try:
                return json.loads(p.read_text())
            except FileNotFoundError:
                raise InputError(f"descriptor file {p} not found") from None
            except json.JSONDecodeError as exc:
                raise InputError(f"{p}: invalid JSON ({exc})") from None
        try:
            return json.loads(str(obj))
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON descriptor ({exc})") from None
    raise InputError(f"cannot read descriptor {obj!r}")


def load_descriptor(obj) -> dict:
    return _load(obj)


def space_from_descriptor(desc):
    """Build a space from its JSON descriptor.

    Kinds: ``weighted-1d`` (``weight``, ``domain`` as ``[a, b]`` or
    ``"unbounded"``, optional ``params``), ``discrete`` (``masses`` plus
    ``metric`` = ``"table"`` with ``table``, ``"edges"`` with ``edges``, or
    ``"euclidean"`` using ``points`` as coordinates) and ``grid``
    (``base`` weighted-1d descriptor, ``start``, ``stop``, ``spacing``).
    """
    desc = _load(desc)
    kind = desc.get("kind")
    if kind == "weighted-1d":
        dom = desc.get("domain", "unbounded")
        if dom == "unbounded":
            dom = (-math.inf, math.inf)
        elif not (isinstance(dom, (list, tuple)) and len(dom) == 2):
            raise InputError("domain must be [a, b] or \"unbounded\"")
        dom = tuple(-math.inf if v is None and i == 0 else math.inf if v is None else float(v)
                    for i, v in enumerate(dom))
        return WeightedLine(weight(desc.get("weight", "lebesgue"), **desc.get("params", {})), dom)
    if kind == "grid":
        base = space_from_descriptor(desc.get("base", {"kind": "weighted-1d", "weight": "lebesgue"}))
        try:
            return discretize(base, float(desc["start"]), float(desc["stop"]), float(desc["spacing"]))
        except KeyError as exc:
            raise InputError(f"grid descriptor lacks {exc}") from None
    if kind == "discrete":
        points = desc.get("points")
        masses = desc.get("masses")
        metric = desc.get("metric", "table")
        coords = desc.get("coords")
        if coords is None and points is not None and all(isinstance(p, (int, float)) for p in points):
            coords = points
        if metric == "edges":
            n = len(masses) if masses is not None else len(points)
            if masses is None:
                masses = [1.0] * n
            return DiscreteSpace.from_edges(n, desc.get("edges", []), masses, coords)
        if metric == "euclidean":
            return DiscreteSpace.from_points(points, masses)
        table = desc.get("table") if metric == "table" else metric
        if table is None:
            raise InputError("discrete descriptor needs a distance table")
        if masses is None:
            masses = [1.0] * len(table)
        return DiscreteSpace(np.asarray(table, dtype=float), masses, coords)
    raise InputError(f"unknown space kind {kind!r}")


def resolve_nodes(space, spec) -> list:
    """Node ids from a list of ids or an open interval ``{"interval": [a, b]}`` of coordinates."""
    if isinstance(spec, Mapping) and "interval" in spec:
        if not isinstance(space, DiscreteSpace) or space.coords is None or space.coords.ndim != 1:
            raise InputError("interval domains need a discrete space with 1-D coordinates")
        a, b = (float(v) for v in spec["interval"])
        return [int(i) for i in np.flatnonzero((space.coords > a) & (space.coords < b))]
    return [space.check_point(int(v)) for v in spec]


def resolve_values(space, mapping, by: str = "node") -> dict:
    """``{node: value}`` from JSON keys that are node ids or (with ``by="point"``) coordinates."""
    out = {}
    for k, v in dict(mapping).items():
        if by == "point":
            if space.coords is None:
                raise InputError("point keys need coordinates")
            hit = np.flatnonzero(np.abs(space.coords - float(k)) < 1e-9)
            if hit.size != 1:
                raise InputError(f"no node at coordinate {k}")
            out[int(hit[0])] = float(v)
        else:
            out[space.check_point(int(k))] = float(v)
    return out


# -- writers -------------------------------------------------------------------

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(payload: dict) -> str:
    """Deterministic JSON with a schema field."""
    body = {"schema": SCHEMA}
    body.update(_clean(payload))
    return json.dumps(body, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload))
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header: Iterable[str], rows: Iterable[Iterable]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def diagnostics_rows(report):
    """Rows of the diagnostics CSV: x, r, mu_B, ratio_2B, annulus_ratio, eps."""
    header = ("x", "r", "mu_B", "ratio_2B", "annulus_ratio", "eps")
    return header, [tuple(row[k] for k in header) for row in report.rows]
