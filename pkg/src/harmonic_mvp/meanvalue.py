"""Ball averages, the mean value defect and harmonicity classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from ._parallel import pmap
from .errors import BallEscapesDomain, InputError
from .functions import FieldFunction
from .quadrature import ABS_TOL
from .space import DiscreteSpace

__all__ = [
    "FieldFunction", "RadiusSet", "Classification", "Domain",
    "point_value", "ball_average", "harmonic_defect", "complement_distance",
    "admissible_radii", "classify", "default_tol",
]

VERDICTS = ("strongly-harmonic", "weakly-harmonic", "subharmonic", "superharmonic", "none")


def default_tol(space) -> float:
    """Defect tolerance: ``1e-12`` on discrete spaces, ``1e-8`` on the line."""
    return 1e-12 if isinstance(space, DiscreteSpace) else 1e-8


def point_value(space, f: FieldFunction, x) -> float:
    """``f(x)`` for a point of ``space``."""
    if isinstance(space, DiscreteSpace):
        return float(space.values(f, [space.check_point(x)])[0])
    return float(f(space.check_point(x)))


def ball_average(space, f: FieldFunction, x, r, tol: float = ABS_TOL) -> float:
    """Mean of ``f`` over the open ball ``B(x, r)``."""
    return space.ball_integral(f, x, r, tol) / space.ball_measure(x, r)


def harmonic_defect(space, f: FieldFunction, x, r, tol: float = ABS_TOL) -> float:
    """``ball_average(f, x, r) - f(x)``; positive values mean sub-mean-value behaviour."""
    return ball_average(space, f, x, r, tol) - point_value(space, f, x)


def complement_distance(space, omega, x) -> float:
    """Distance from ``x`` to the complement of ``omega``.

    ``omega`` is ``None`` (the whole space, distance ``inf``), an open
    interval ``(a, b)`` on the line, or a collection of node ids.
    """
    if omega is None:
        return math.inf
    if isinstance(space, DiscreteSpace):
        inside = np.zeros(space.size, dtype=bool)
        inside[np.asarray(list(omega), dtype=int)] = True
        x = space.check_point(x)
        if not inside[x]:
            raise InputError(f"node {x} is not in the domain")
        out = space.metric[x][~inside]
        return float(out.min()) if out.size else math.inf
    a, b = (float(v) for v in omega)
    x = space.check_point(x)
    if not a < x < b:
        raise InputError(f"point {x:g} is not in the domain ({a:g}, {b:g})")
    return min(x - a, b - x)


@dataclass
class RadiusSet:
    """Admissible radii found at one point.

    ``radii`` holds grid radii with ``|defect| < tol`` and refined roots of
    sign changes; ``brackets`` keeps ``(r_lo, r_hi, defect)`` rows for CSV.
    """

    point: object
    radii: np.ndarray
    defects: np.ndarray
    brackets: list = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return self.radii.size == 0

    @property
    def r_m(self) -> float:
        return float(self.radii.min()) if self.radii.size else math.nan

    @property
    def r_M(self) -> float:
        return float(self.radii.max()) if self.radii.size else math.nan

    def to_dict(self) -> dict:
        return {"point": _jsonable_point(self.point), "radii": self.radii.tolist(),
                "r_m": self.r_m, "r_M": self.r_M}


def _jsonable_point(x):
    return int(x) if isinstance(x, (int, np.integer)) else float(x)


def region_radii(sets: Sequence[RadiusSet]) -> tuple[float, float]:
    """``(r_m, r_M)`` over a region: inf and sup of all admissible radii."""
    vals = [s.radii for s in sets if s.radii.size]
    if not vals:
        return math.nan, math.nan
    allr = np.concatenate(vals)
    return float(allr.min()), float(allr.max())


def admissible_radii(space, f: FieldFunction, x, r_min: float, r_max: float, grid: int = 64,
                     tol: float | None = None, omega=None, geometric: bool = True) -> RadiusSet:
    """Radii in ``[r_min, r_max]`` at which the mean value identity holds at ``x``.

    The defect is scanned on a grid; each strict sign change is refined with
    Brent's method and grid radii with ``|defect| < tol`` are kept as
    tangential zeros.
    """
    if not 0 < r_min < r_max:
        raise InputError("need 0 < r_min < r_max")
    if grid < 2:
        raise InputError("the radius grid needs at least two points")
    tol = default_tol(space) if tol is None else tol
    dist = complement_distance(space, omega, x)
    if not r_max < dist:
        raise BallEscapesDomain(f"B({x}, {r_max:g}) is not compactly contained in the domain "
                                f"(distance to complement {dist:g})")
    rs = np.geomspace(r_min, r_max, grid) if geometric else np.linspace(r_min, r_max, grid)
    d = np.array(pmap(lambda r: harmonic_defect(space, f, x, r), rs))
    found = []
    brackets = []
    for r, v in zip(rs, d):
        if abs(v) < tol:
            found.append(r)
            brackets.append((float(r), float(r), float(v)))
    if not isinstance(space, DiscreteSpace):
        for i in range(len(rs) - 1):
            a, b = d[i], d[i + 1]
            if abs(a) >= tol and abs(b) >= tol and a * b < 0:
                root = brentq(lambda r: harmonic_defect(space, f, x, r), rs[i], rs[i + 1], xtol=1e-13)
                found.append(root)
                brackets.append((float(rs[i]), float(rs[i + 1]), harmonic_defect(space, f, x, root)))
    radii = np.array(sorted(set(float(r) for r in found)))
    return RadiusSet(x, radii, d, brackets)


@dataclass
class Domain:
    """Sampled points of an open set ``omega`` (``None`` for the whole space)."""

    points: Sequence
    omega: object = None


@dataclass
class Classification:
    """Outcome of :func:`classify` on a sampled set.

    ``witness`` holds per-point :class:`RadiusSet` objects for the harmonic
    verdicts and the worst ``(x, r, defect)`` otherwise.
    """

    verdict: str
    max_defect: float
    witness: object
    strongly: bool
    weakly: bool
    sub: bool
    super: bool
    defects: np.ndarray
    points: list
    radii: list

    def to_dict(self) -> dict:
        if isinstance(self.witness, list):
            wit = [s.to_dict() for s in self.witness]
        else:
            x, r, v = self.witness
            wit = {"x": _jsonable_point(x), "r": float(r), "defect": float(v)}
        return {"verdict": self.verdict, "max_defect": float(self.max_defect), "witness": wit,
                "flags": {"strongly": self.strongly, "weakly": self.weakly,
                          "subharmonic": self.sub, "superharmonic": self.super}}


def classify(space, f: FieldFunction, domain, radius_grid, tol: float | None = None) -> Classification:
    """Classify ``f`` on a sampled domain by the sign pattern of its defects.

    Parameters
    ----------
    domain : Domain or sequence of points
        Plain sequences are treated as samples of the whole space.
    radius_grid : sequence of float or callable
        Radii tested at every point, or ``x -> radii`` for point-dependent
        grids.  Every tested ball must be compactly contained in the domain.
    tol : float, optional
        Defect tolerance, see :func:`default_tol`.

    Notes
    -----
    Verdict precedence is strongly > weakly > sub > super > none.  The
    weak verdict only refers to the sampled points and radii.
    """
    if not isinstance(domain, Domain):
        domain = Domain(list(domain))
    tol = default_tol(space) if tol is None else tol
    points = list(domain.points)
    if not points:
        raise InputError("no sample points")

    def radii_at(x):
        rs = radius_grid(x) if callable(radius_grid) else radius_grid
        rs = np.asarray(rs, dtype=float)
        if rs.size == 0:
            raise InputError(f"no radii to test at {x}")
        dist = complement_distance(space, domain.omega, x)
        if not np.all(rs < dist):
            raise BallEscapesDomain(f"a tested ball at {x} leaves the domain (distance {dist:g})")
        return rs

    per_point = [radii_at(x) for x in points]
    jobs = [(i, j) for i, rs in enumerate(per_point) for j in range(rs.size)]
    vals = pmap(lambda ij: harmonic_defect(space, f, points[ij[0]], per_point[ij[0]][ij[1]]), jobs)
    width = max(rs.size for rs in per_point)
    D = np.full((len(points), width), np.nan)
    for (i, j), v in zip(jobs, vals):
        D[i, j] = v

    absD = np.abs(D)
    max_def = float(np.nanmax(absD))
    strongly = bool(np.nanmax(absD) < tol)
    zero = absD < tol
    weakly = bool(np.all(zero.any(axis=1)))
    sub = bool(np.nanmin(D) >= -tol)
    sup = bool(np.nanmax(D) <= tol)
    if strongly:
        verdict = VERDICTS[0]
    elif weakly:
        verdict = VERDICTS[1]
    elif sub:
        verdict = VERDICTS[2]
    elif sup:
        verdict = VERDICTS[3]
    else:
        verdict = VERDICTS[4]

    if strongly or weakly:
        witness = [RadiusSet(x, rs[zero[i, :rs.size]], D[i, :rs.size]) for i, (x, rs) in enumerate(zip(points, per_point))]
    else:
        if sub:
            i, j = np.unravel_index(np.nanargmax(D), D.shape)
        elif sup:
            i, j = np.unravel_index(np.nanargmin(D), D.shape)
        else:
            i, j = np.unravel_index(np.nanargmax(absD), D.shape)
        witness = (points[i], float(per_point[i][j]), float(D[i, j]))
    return Classification(verdict, max_def, witness, strongly, weakly, sub, sup, D, points,
                          [rs.tolist() for rs in per_point])


def defect_table(space, f: FieldFunction, points, radii: Callable | Sequence) -> np.ndarray:
    """Matrix of defects ``[point, radius]`` (NaN-padded for ragged grids)."""
    return classify(space, f, list(points), radii, tol=math.inf).defects
