"""Harmonic modification, lower Perron solutions and barriers on discrete spaces.

The family of all subharmonic functions below the data is replaced by a
finite set of generators and a finite schedule of harmonic modifications;
the achieved defect is reported rather than assumed.

Inside a ball the Dirichlet problem is the nearest-neighbour averaging
problem: the inner strip width defaults to 1.5 times the smallest distance
between nodes, so on a uniform grid each node averages itself and its two
neighbours and the inner solutions are exactly affine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dirichlet import DirichletProblem, boundary_strip, direct_solve_oracle, nearest_exterior
from .errors import BallEscapesDomain, InputError, PreconditionError
from .functions import FieldFunction, maximum
from .meanvalue import complement_distance, harmonic_defect, point_value
from .space import DiscreteSpace


def _require_discrete(space):
    if not isinstance(space, DiscreteSpace):
        raise InputError("Perron tools run on discrete spaces; discretize the line first")


def min_spacing(space: DiscreteSpace) -> float:
    D = space.metric
    off = D[~np.eye(space.size, dtype=bool)]
    return float(off.min()) if off.size else math.inf


def _nn_radius(space, inner_eps):
    return 1.5 * min_spacing(space) if inner_eps is None else float(inner_eps)


def _omega_nodes(space, omega):
    arr = np.unique(np.asarray([space.check_point(v) for v in omega], dtype=int))
    if arr.size == 0:
        raise InputError("omega is empty")
    return arr


def harmonic_modification(space: DiscreteSpace, f: FieldFunction, x0, r: float, omega,
                          inner_eps: float | None = None) -> FieldFunction:
    """Replace ``f`` inside ``B(x0, r)`` by the solution of the ball problem with data ``f``.

    The ball must be compactly contained in ``omega`` (``r`` below the
    distance from ``x0`` to the complement).  Outside the ball the values of
    ``f`` are kept unchanged.
    """
    _require_discrete(space)
    x0 = space.check_point(x0)
    r = float(r)
    if not r > 0:
        raise InputError("radius must be positive")
    dist = complement_distance(space, list(omega), x0)
    if not r < dist:
        raise BallEscapesDomain(f"B({x0}, {r:g}) is not compactly contained in omega")
    vals = np.array(space.values(f), dtype=float)
    ball = np.flatnonzero(space.metric[x0] < r)
    eps = _nn_radius(space, inner_eps)
    strip = boundary_strip(space, ball, eps, boundary=None)
    if not np.all(np.isfinite(vals[strip.gamma_eps])):
        raise InputError("f must be defined on the strip around the ball")
    problem = DirichletProblem(space, strip, vals, variant="measurable")
    inner = direct_solve_oracle(problem)
    vals[ball] = inner.values[ball]
    return FieldFunction(values=vals, name=f"mod({f.name})")


def nn_defects(space: DiscreteSpace, values: np.ndarray, nodes, inner_eps=None) -> np.ndarray:
    """Defect of the nearest-neighbour average at each node (NaN-safe on the ball)."""
    eps = _nn_radius(space, inner_eps)
    out = np.empty(len(nodes))
    for k, x in enumerate(nodes):
        members = np.flatnonzero(space.metric[x] < eps)
        m = space.masses[members]
        out[k] = float(np.dot(values[members], m) / m.sum()) - values[x]
    return out


@dataclass
class SubharmonicFamilyPlan:
    """Finite stand-in for the family of subharmonic functions below ``g``.

    ``schedule`` is a sequence of ``(centre, radius)`` balls; ``None`` means
    :func:`default_schedule`.
    """

    generators: Sequence[FieldFunction]
    schedule: Sequence | None = None
    rounds: int = 3


def default_schedule(space: DiscreteSpace, omega, levels: int = 6, fraction: float = 0.25) -> list:
    """Coarse-to-fine balls of radius ``fraction * dist(c, complement)``.

    With 1-D coordinates the centres are the nodes nearest to the dyadic
    points ``a + (b - a) j / 2^k`` of the domain's hull (odd ``j``,
    ``k = 1..levels``); otherwise every domain node is used, farthest from
    the complement first.
    """
    omega = _omega_nodes(space, omega)
    dist = {int(x): complement_distance(space, omega.tolist(), int(x)) for x in omega}
    centres: list[int] = []
    if space.coords is not None and space.coords.ndim == 1:
        xs = space.coords[omega]
        a, b = float(xs.min()), float(xs.max())
        for k in range(1, levels + 1):
            for j in range(1, 2 ** k, 2):
                target = a + (b - a) * j / 2 ** k
                c = int(omega[np.argmin(np.abs(xs - target))])
                if c not in centres:
                    centres.append(c)
        centres += [int(x) for x in omega if int(x) not in centres]
    else:
        centres = sorted(dist, key=lambda x: (-dist[x], x))
    return [(c, fraction * dist[c]) for c in centres if math.isfinite(dist[c])]


@dataclass
class PerronTrace:
    """Per-round record of :func:`lower_perron`."""

    round_max: list = field(default_factory=list)
    round_min_increment: list = field(default_factory=list)
    round_defect: list = field(default_factory=list)
    tables: list = field(default_factory=list)
    sup_g: float = math.nan
    boundary: np.ndarray | None = None


def check_generators(space, omega, boundary, g_vals, generators, tol=1e-10, inner_eps=None):
    """Raise :class:`PreconditionError` naming the first generator that is not admissible."""
    for k, gen in enumerate(generators):
        vals = space.values(gen)
        if np.any(vals[boundary] > g_vals[boundary] + tol):
            raise PreconditionError(f"generator {k} ({gen.name}) exceeds g on the boundary")
        full = np.array(vals, dtype=float)
        d = nn_defects(space, full, omega, inner_eps)
        if d.min() < -tol:
            raise PreconditionError(f"generator {k} ({gen.name}) is not subharmonic "
                                    f"(defect {d.min():.3g} at node {omega[int(np.argmin(d))]})")


def lower_perron(space: DiscreteSpace, omega, g, plan: SubharmonicFamilyPlan, boundary=None,
                 tol: float = 1e-10, inner_eps: float | None = None):
    """Approximate the lower Perron solution by generator maxima and modifications.

    The working table holds the pointwise maximum of the generators on
    ``omega`` and ``g`` on the boundary nodes.  Each round applies every
    scheduled harmonic modification in order.

    Returns
    -------
    P : FieldFunction
        Values on ``omega`` and its boundary (NaN elsewhere).
    trace : PerronTrace
    """
    _require_discrete(space)
    omega = _omega_nodes(space, omega)
    bnd = nearest_exterior(space, omega) if boundary is None else _omega_nodes(space, boundary)
    if isinstance(g, FieldFunction):
        g_vals = np.array(space.values(g), dtype=float)
    else:
        g_vals = np.full(space.size, np.nan)
        for k, v in dict(g).items():
            g_vals[space.check_point(int(k))] = float(v)
    if not np.all(np.isfinite(g_vals[bnd])):
        raise InputError("g must be given at every boundary node")
    if not plan.generators:
        raise InputError("the plan has no generators")
    check_generators(space, omega, bnd, g_vals, plan.generators, tol, inner_eps)
    schedule = default_schedule(space, omega) if plan.schedule is None else list(plan.schedule)
    omega_list = omega.tolist()
    for c, r in schedule:
        if not float(r) < complement_distance(space, omega_list, int(c)):
            raise BallEscapesDomain(f"scheduled ball B({c}, {r:g}) leaves omega")

    table = np.full(space.size, np.nan)
    table[omega] = space.values(maximum(*plan.generators) if len(plan.generators) > 1
                                else plan.generators[0], omega)
    table[bnd] = g_vals[bnd]
    trace = PerronTrace(sup_g=float(np.max(g_vals[bnd])), boundary=bnd)
    trace.tables.append(table.copy())
    trace.round_max.append(float(np.nanmax(table)))
    trace.round_defect.append(float(np.max(np.abs(nn_defects(space, table, omega, inner_eps)))))
    for _ in range(int(plan.rounds)):
        before = table.copy()
        for c, r in schedule:
            f = FieldFunction(values=table, name="P")
            table = np.array(harmonic_modification(space, f, int(c), float(r), omega_list, inner_eps).values)
        trace.tables.append(table.copy())
        trace.round_max.append(float(np.nanmax(table)))
        trace.round_min_increment.append(float(np.min(table[omega] - before[omega])))
        trace.round_defect.append(float(np.max(np.abs(nn_defects(space, table, omega, inner_eps)))))
    return FieldFunction(values=table, name="P[g]"), trace


# -- barriers ------------------------------------------------------------------

@dataclass
class BarrierCandidate:
    f: FieldFunction
    x0: object


@dataclass
class BarrierVerdict:
    valid: bool
    subharmonic: bool
    vanishes: bool
    negative_elsewhere: bool
    failures: list
    min_defect: float
    value_at_x0: float


def _sample_region(space, omega, n_samples):
    """Interior sample points and boundary points of ``omega``."""
    if isinstance(space, DiscreteSpace):
        nodes = _omega_nodes(space, omega)
        return [int(x) for x in nodes], [int(b) for b in nearest_exterior(space, nodes)]
    a, b = (float(v) for v in omega)
    pts = np.linspace(a, b, n_samples + 2)[1:-1].tolist()
    lo, hi = space.domain
    return pts, [p for p in (a, b) if lo <= p <= hi]


def verify_barrier(space, omega, candidate: BarrierCandidate, tol: float = 1e-8,
                   radius_cap: float = math.inf, n_samples: int = 41) -> BarrierVerdict:
    """Check the three barrier conditions at ``candidate.x0``.

    (1) defect ``>= -tol`` at radius ``min(dist(x, complement)/2, radius_cap)``
    at every sampled interior point, (2) ``|f(x0)| < tol``, (3) ``f < -tol``
    at every other sampled boundary point.
    """
    interior, bnd = _sample_region(space, omega, n_samples)
    f, x0 = candidate.f, candidate.x0
    omega_arg = list(omega) if isinstance(space, DiscreteSpace) else omega
    failures = []
    if not any(_same_point(space, x0, b) for b in bnd):
        failures.append(f"x0={x0} is not a sampled boundary point")
    min_def = math.inf
    for x in interior:
        r = min(0.5 * complement_distance(space, omega_arg, x), radius_cap)
        d = harmonic_defect(space, f, x, r)
        min_def = min(min_def, d)
    sub = min_def >= -tol
    if not sub:
        failures.append(f"not locally subharmonic (min defect {min_def:.3g})")
    v0 = point_value(space, f, x0)
    vanishes = abs(v0) < tol
    if not vanishes:
        failures.append(f"f(x0) = {v0:.3g} is not zero")
    others = [b for b in bnd if not _same_point(space, x0, b)]
    neg = all(point_value(space, f, b) < -tol for b in others)
    if not neg:
        failures.append("f is not negative on the rest of the boundary")
    return BarrierVerdict(not failures, sub, vanishes, neg, failures, float(min_def), float(v0))


def _same_point(space, a, b) -> bool:
    if isinstance(space, DiscreteSpace):
        return int(a) == int(b)
    return float(a) == float(b)


@dataclass
class RegularityReport:
    rows: list            # (point, distance to x0, deviation)
    monotone: bool
    final_deviation: float
    passed: bool
    barrier: BarrierVerdict


def boundary_regularity_check(space: DiscreteSpace, omega, g, barrier: BarrierCandidate | None,
                              approach_points, perron: FieldFunction | None = None,
                              plan: SubharmonicFamilyPlan | None = None,
                              tol: float = 1e-4) -> RegularityReport:
    """Deviations ``|P[g](y) - g(x0)|`` along points approaching the barrier point.

    ``perron`` may be passed precomputed; otherwise ``plan`` is used.  The
    check passes when the deviations are nonincreasing along the approach
    and the last one is below ``tol``.
    """
    if barrier is None:
        raise PreconditionError("a verified barrier is required")
    verdict = verify_barrier(space, omega, barrier)
    if not verdict.valid:
        raise PreconditionError("barrier candidate failed: " + "; ".join(verdict.failures))
    if perron is None:
        if plan is None:
            raise InputError("pass either the Perron solution or a plan")
        perron, _ = lower_perron(space, omega, g, plan)
    x0 = space.check_point(barrier.x0)
    g0 = float(space.values(g, [x0])[0]) if isinstance(g, FieldFunction) else float(dict(g)[x0])
    pts = sorted((space.check_point(y) for y in approach_points),
                 key=lambda y: -space.distance(x0, y))
    rows = [(y, space.distance(x0, y), abs(float(perron.values[y]) - g0)) for y in pts]
    devs = [r[2] for r in rows]
    monotone = all(b <= a for a, b in zip(devs, devs[1:]))
    final = devs[-1] if devs else math.nan
    return RegularityReport(rows, monotone, final, bool(monotone and final < tol), verdict)
