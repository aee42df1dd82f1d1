"""Theoretical constants and their empirical counterparts.

:func:`constant_sheet` evaluates the Harnack, Hölder, Lipschitz and
large-scale constants from space parameters; the remaining functions
measure the corresponding quantities on concrete functions so the two can be
compared.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BallEscapesDomain, InputError
from .functions import FieldFunction
from .meanvalue import complement_distance, harmonic_defect, point_value
from .space import DiscreteSpace, SamplePlan, measure_diagnostics


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

@dataclass
class ConstantSheet:
    """Constants computed from space parameters; ``None`` where inputs were missing."""

    C_mu: float
    harnack_strong: float
    harnack_weak_ball: float | None = None
    harnack_compact_weak: float | None = None
    holder_alpha: float | None = None
    annular_ball_constant: float | None = None
    lipschitz_uniform: float | None = None
    large_scale_c: float | None = None
    large_scale_gap: float | None = None
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _positive(name, v):
    if v is None:
        return None
    v = float(v)
    if not (v > 0 and math.isfinite(v)):
        raise InputError(f"{name} must be positive and finite, got {v!r}")
    return v


def constant_sheet(C_mu: float, t: float | None = None, r_M: float | None = None,
                   r_m: float | None = None, n: int | None = None, delta: float | None = None,
                   A: float | None = None, f_sup: float | None = None, Q: float | None = None,
                   M: float | None = None, dist: float | None = None, C: float | None = None,
                   f_L1: float | None = None, mu_2r: float | None = None,
                   r: float | None = None) -> ConstantSheet:
    """Evaluate every constant whose inputs are supplied.

    Parameters
    ----------
    C_mu : doubling constant, must exceed 1
    t : Hölder scale factor, must exceed 4
    r_M, r_m : largest and smallest admissible radii
    n : chain length for the compact-set Harnack constant
    delta, A : annular decay exponent in (0, 1] and constant
    f_sup : sup norm of f on the enlarged ball
    Q, M, dist : uniform exponent, bound of f, distance to the complement
    C : constant of the doubling lower bound (defaults to ``C_mu**2``)
    f_L1, mu_2r, r : data of the large-scale estimate

    Notes
    -----
    For the large-scale constants ``Q`` defaults to ``log2(C_mu)`` and
    ``C`` to ``C_mu**2``, the pair obtained by iterating the doubling
    inequality.
    """
    C_mu = float(C_mu)
    if not C_mu > 1 or not math.isfinite(C_mu):
        raise InputError("C_mu must be a finite number greater than 1")
    if t is not None and not float(t) > 4:
        raise InputError("t must exceed 4")
    if delta is not None and not 0 < float(delta) <= 1:
        raise InputError("delta must lie in (0, 1]")
    r_M, r_m, dist, M = (_positive(k, v) for k, v in (("r_M", r_M), ("r_m", r_m), ("dist", dist), ("M", M)))
    f_L1, mu_2r, r, A = (_positive(k, v) for k, v in (("f_L1", f_L1), ("mu_2r", mu_2r), ("r", r), ("A", A)))
    if r_M is not None and r_m is not None and r_m > r_M:
        raise InputError("r_m must not exceed r_M")
    if f_sup is not None and not float(f_sup) >= 0:
        raise InputError("f_sup must be nonnegative")

    sheet = ConstantSheet(C_mu, C_mu ** 3, inputs={k: v for k, v in dict(
        t=t, r_M=r_M, r_m=r_m, n=n, delta=delta, A=A, f_sup=f_sup, Q=Q, M=M, dist=dist,
        C=C, f_L1=f_L1, mu_2r=mu_2r, r=r).items() if v is not None})
    if r_M is not None and r_m is not None:
        expo = math.log2(5 * r_M / (3 * r_m)) + 1
        sheet.harnack_weak_ball = C_mu ** expo
        if n is not None:
            if int(n) < 1:
                raise InputError("chain length must be at least 1")
            sheet.harnack_compact_weak = C_mu ** (int(n) * expo)
    if t is not None:
        c2 = C_mu ** 2
        sheet.holder_alpha = math.log(c2 / (c2 - 1)) / math.log(float(t))
    if delta is not None and A is not None and f_sup is not None:
        sheet.annular_ball_constant = 4 * 9 ** float(delta) * float(f_sup) * C_mu ** 3 * A
    if Q is not None and M is not None and dist is not None:
        Qf = float(Q)
        sheet.lipschitz_uniform = Qf * 2 ** (Qf + 1) * M / dist
    Q_ls = float(Q) if Q is not None else math.log2(C_mu)
    C_ls = float(C) if C is not None else C_mu ** 2
    if f_L1 is not None and mu_2r is not None:
        sheet.large_scale_c = Q_ls * C_ls ** 2 * f_L1 / mu_2r
    if r is not None:
        if not C_ls > 1:
            raise InputError("the large-scale gap needs C > 1")
        sheet.large_scale_gap = r * (C_ls ** (1.0 / (Q_ls * (C_ls - 1))) - 1)
    return sheet


def annular_ball_bound(sheet: ConstantSheet, r: float) -> Callable[[float], float]:
    """``d -> annular_ball_constant * (d / r)**delta`` for pairs in ``B(x0, r/2)``."""
    if sheet.annular_ball_constant is None:
        raise InputError("the sheet has no annular ball constant")
    delta = sheet.inputs["delta"]
    const = sheet.annular_ball_constant
    return lambda d: const * (d / r) ** delta


# ---------------------------------------------------------------------------
# Harnack
# ---------------------------------------------------------------------------

def _ball_samples(space, x, r, n):
    if isinstance(space, DiscreteSpace):
        return [int(y) for y in space.ball_members(x, r)]
    lo, hi = space.clip(x - r, x + r)
    return np.linspace(lo, hi, n + 2)[1:-1].tolist()


def measured_doubling(space, x, r, n_centres: int = 9, n_radii: int = 12) -> float:
    """Doubling constant sampled at centres in ``B(x, r)`` and radii up to ``5 r``."""
    centres = _ball_samples(space, x, r, n_centres)
    if isinstance(space, DiscreteSpace):
        centres = centres[:: max(1, len(centres) // n_centres)]
    radii = np.geomspace(r / 8, 5 * r, n_radii)
    return measure_diagnostics(space, SamplePlan(centres, radii, eps=(0.5,))).doubling_constant


@dataclass
class HarnackResult:
    ratio: float
    bound: float
    passed: bool
    sup: float
    inf: float
    C_mu: float


def empirical_harnack(space, f: FieldFunction, x, r: float, omega=None, C_mu: float | None = None,
                      n_samples: int = 401, harmonic_tol: float | None = None) -> HarnackResult:
    """Compare ``sup_B f / inf_B f`` with ``C_mu**3`` on ``B = B(x, r)``.

    Requires ``B(x, 6r)`` to be compactly contained in ``omega`` and ``f``
    nonnegative on it.  ``C_mu`` defaults to :func:`measured_doubling`.
    When ``harmonic_tol`` is given, the defect of ``f`` is checked at a few
    radii around sampled points of ``B(x, 3r)``.
    """
    if not r > 0:
        raise InputError("radius must be positive")
    if not 6 * r < complement_distance(space, omega, x):
        raise BallEscapesDomain(f"B({x}, {6 * r:g}) is not compactly contained in the domain")
    big = _ball_samples(space, x, 6 * r, 4 * n_samples)
    big_vals = np.array([point_value(space, f, y) for y in big])
    if np.any(big_vals < 0):
        raise InputError(f"{f.name} takes negative values on the enlarged ball")
    if harmonic_tol is not None:
        probe = _ball_samples(space, x, 3 * r, 7)
        for y in probe:
            for rr in (0.5 * r, r, 2 * r):
                d = harmonic_defect(space, f, y, rr)
                if abs(d) >= harmonic_tol:
                    raise InputError(f"{f.name} is not harmonic at ({y}, {rr:g}): defect {d:.3g}")
    vals = np.array([point_value(space, f, y) for y in _ball_samples(space, x, r, n_samples)])
    sup, inf = float(vals.max()), float(vals.min())
    if C_mu is None:
        C_mu = measured_doubling(space, x, r)
    bound = float(C_mu) ** 3
    if inf == 0:
        ratio = math.inf if sup > 0 else 1.0
    else:
        ratio = sup / inf
    return HarnackResult(ratio, bound, bool(ratio <= bound), sup, inf, float(C_mu))


def ball_chain(points: Sequence[float], radius: float) -> list:
    """Greedy chain of ball centres of the given radius covering sorted 1-D samples.

    Consecutive centres are closer than ``radius`` so the balls overlap;
    ``len(result)`` is the chain length fed to the compact-set constant.
    """
    pts = np.sort(np.asarray(points, dtype=float))
    if pts.size == 0 or not radius > 0:
        raise InputError("need samples and a positive radius")
    centres = [float(pts[0])]
    for p in pts[1:]:
        if p - centres[-1] >= radius:
            # move to the farthest sample still inside the current ball
            inside = pts[(pts > centres[-1]) & (pts - centres[-1] < radius)]
            nxt = float(inside.max()) if inside.size else float(p)
            if nxt == centres[-1]:
                nxt = float(p)
            centres.append(nxt)
            while p - centres[-1] >= radius:
                centres.append(centres[-1] + 0.5 * radius)
    return centres


# ---------------------------------------------------------------------------
# moduli of continuity
# ---------------------------------------------------------------------------

@dataclass
class ModulusFit:
    """Fit of ``|f(x) - f(y)| <= constant * d**exponent`` over sampled pairs."""

    constant: float
    exponent: float
    degenerate: bool
    worst_ratio: float
    rows: list
    skipped: int
    window: tuple
    notes: list = field(default_factory=list)


def empirical_modulus(space, f: FieldFunction, pairs, bound: Callable | None = None,
                      noise_floor: float = 1e-6) -> ModulusFit:
    """Log-log fit of increments against distances.

    Pairs closer than ``noise_floor`` are skipped.  ``constant`` is the
    smallest value making the fitted power law an upper envelope of the
    data.  ``worst_ratio`` is ``max increment / bound(d)`` when a bound is
    supplied (values at most 1 mean the bound holds).
    """
    rows = []
    skipped = 0
    for x, y in pairs:
        d = space.distance(x, y)
        if d < noise_floor:
            skipped += 1
            continue
        rows.append((float(d), abs(point_value(space, f, x) - point_value(space, f, y))))
    notes = [f"skipped {skipped} pairs closer than {noise_floor:g}"] if skipped else []
    if not rows:
        raise InputError("no usable pairs")
    d = np.array([r[0] for r in rows])
    inc = np.array([r[1] for r in rows])
    window = (float(d.min()), float(d.max()))
    worst = math.nan
    if bound is not None:
        worst = float(max(i / bound(di) for di, i in zip(d, inc)))
    scale = max(1.0, float(np.max(np.abs([point_value(space, f, p) for pr in pairs[:50] for p in pr]))))
    pos = inc > 1e-14 * scale
    if pos.sum() < 2 or np.ptp(np.log(d[pos])) == 0:
        notes.append("increments vanish; exponent fit is degenerate")
        return ModulusFit(0.0 if not pos.any() else float(np.max(inc / d)), math.nan, True, worst,
                          rows, skipped, window, notes)
    slope, _ = np.polyfit(np.log(d[pos]), np.log(inc[pos]), 1)
    const = float(np.max(inc[pos] / d[pos] ** slope))
    return ModulusFit(const, float(slope), False, worst, rows, skipped, window, notes)


# ---------------------------------------------------------------------------
# Liouville
# ---------------------------------------------------------------------------

@dataclass
class LiouvilleScan:
    x: object
    y: object
    radii: np.ndarray
    ratios: np.ndarray
    containment: np.ndarray
    liminf: float
    window: tuple

    def rows(self):
        return list(zip(self.radii.tolist(), self.ratios.tolist()))


def _log_shell(space, x, lo, hi):
    """log mu(B(x, hi) minus B(x, lo)) for 0 <= lo < hi."""
    if isinstance(space, DiscreteSpace):
        d = space.metric[space.check_point(x)]
        m = float(space.masses[(d >= lo) & (d < hi)].sum())
        return math.log(m) if m > 0 else -math.inf
    if lo <= 0:
        return space.log_ball_measure(x, hi)
    return space.log_annulus_measure(x, hi, 1.0 - lo / hi)


def liouville_scan(space, x, y, radii=None, n: int = 60) -> LiouvilleScan:
    """Ratios ``mu(B(x,r) symmetric-difference B(y,r)) / mu(B(x,r))`` on increasing radii.

    The liminf is estimated as the minimum over the final third of the
    schedule.  Default radii are geometric from ``2 d(x,y)`` to
    ``1e4 d(x,y)``.  ``containment`` holds the upper bound
    ``mu(B(x, r+d) minus B(x, r-d)) / mu(B(x, r))``.
    """
    d = space.distance(x, y)
    if radii is None:
        if d == 0:
            raise InputError("x and y coincide; supply radii")
        radii = np.geomspace(2 * d, 1e4 * d, n)
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0:
        raise InputError("radii must be a non-empty sequence")
    if np.any(np.diff(radii) <= 0):
        raise InputError("radii must be increasing")
    if np.any(radii <= d):
        raise InputError("every radius must exceed d(x, y)")
    ratios, bounds = [], []
    for r in radii:
        lb = space.log_ball_measure(x, r)
        ls = space.log_symm_diff_measure(x, y, r, r)
        ratios.append(math.exp(ls - lb) if ls > -math.inf else 0.0)
        lc = _log_shell(space, x, r - d, r + d)
        bounds.append(math.exp(lc - lb) if lc > -math.inf else 0.0)
    ratios = np.array(ratios)
    k = max(1, radii.size // 3)
    return LiouvilleScan(x, y, radii, ratios, np.array(bounds), float(ratios[-k:].min()),
                         (float(radii[-k]), float(radii[-1])))


# ---------------------------------------------------------------------------
# dilatations
# ---------------------------------------------------------------------------

def pointwise_dilatation(space, f: FieldFunction, x, radii, samples: int = 201):
    """Estimate the lower and upper pointwise dilatations of ``f`` at ``x``.

    For each radius the sup of ``|f(x) - f(y)| / r`` is taken over sampled
    ``y`` in the open ball; ``lip`` and ``Lip`` are the min and max of these
    quotients over the final third of the (decreasing) radii.

    Returns
    -------
    lip, Lip : float
    quotients : ndarray
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0 or np.any(radii <= 0):
        raise InputError("radii must be positive")
    if np.any(np.diff(radii) >= 0):
        raise InputError("radii must be decreasing")
    fx = point_value(space, f, x)
    q = []
    for r in radii:
        if isinstance(space, DiscreteSpace):
            ys = space.ball_members(x, r)
            vals = space.values(f, ys)
        else:
            lo, hi = space.clip(x - r, x + r)
            # the sup over an open ball is approached at its edge
            edge = r * 1e-9
            ys = np.concatenate([np.linspace(lo, hi, samples + 2)[1:-1], [lo + edge, hi - edge]])
            vals = np.asarray(f(ys), dtype=float)
        with np.errstate(over="ignore"):
            # an unbounded quotient is a legitimate answer here
            q.append(float(np.max(np.abs(vals - fx)) / r))
    q = np.array(q)
    tail = q[-max(1, q.size // 3):]
    return float(tail.min()), float(tail.max()), q


# ---------------------------------------------------------------------------
# principles
# ---------------------------------------------------------------------------

@dataclass
class PrincipleReport:
    strong_max: dict
    weak_max: dict
    comparison: list
    dimension: dict | None
    passed: bool


def _closure_samples(space, domain, n):
    if isinstance(space, DiscreteSpace):
        from .dirichlet import nearest_exterior
        omega = np.unique(np.asarray(list(domain), dtype=int))
        bnd = nearest_exterior(space, omega)
        return omega.tolist(), bnd.tolist(), list(domain)
    a, b = (float(v) for v in domain)
    pts = np.linspace(a, b, n).tolist()
    return pts[1:-1], [pts[0], pts[-1]], (a, b)


def dimension_probe(space, basis: Sequence[FieldFunction], points, omega=None,
                    fractions=(0.1, 0.3, 0.6, 0.9), max_radius: float = 5.0,
                    rank_tol: float = 1e-8) -> dict:
    """Dimension of the harmonic span of ``basis`` on a probe grid.

    Builds the matrix of defects (functions by probes) and reports
    ``len(basis) - rank``, the dimension of the set of coefficient vectors
    whose combination has zero defect at every probe.  Singular values below
    ``rank_tol * sqrt(#probes)`` count as zero.
    """
    probes = []
    for x in points:
        dist = min(complement_distance(space, omega, x), max_radius)
        probes += [(x, fr * dist) for fr in fractions]
    M = np.array([[harmonic_defect(space, f, x, r) for x, r in probes] for f in basis])
    sv = np.linalg.svd(M, compute_uv=False)
    cutoff = rank_tol * math.sqrt(len(probes))
    rank = int(np.sum(sv > cutoff))
    per = {f.name: float(np.max(np.abs(row))) for f, row in zip(basis, M)}
    return {"kernel_dimension": len(basis) - rank, "rank": rank, "singular_values": sv.tolist(),
            "max_defects": per, "probes": len(probes)}


def principle_checks(space, functions: Sequence[FieldFunction], domain, n_samples: int = 101,
                     tol: float = 1e-10, basis: Sequence[FieldFunction] | None = None,
                     probe_points=None) -> PrincipleReport:
    """Maximum principles, comparison and an optional dimension probe on samples.

    ``domain`` is an interval ``(a, b)`` on the line (sampled with
    ``n_samples`` points, the ends acting as the boundary) or a list of node
    ids on a discrete space (boundary = nearest exterior nodes).

    * strong maximum probe: a nonconstant function attains its sampled max
      and min only at boundary points;
    * weak maximum: ``sup`` and ``inf`` over the samples are controlled by
      the boundary values;
    * comparison: for each ordered pair with ``f >= g`` on the boundary,
      ``f >= g`` at every sample.
    """
    interior, bnd, omega = _closure_samples(space, domain, n_samples)
    allpts = interior + bnd
    nb = len(interior)
    values = {}
    strong, weak = {}, {}
    for f in functions:
        v = np.array([point_value(space, f, p) for p in allpts])
        values[f.name] = v
        scale = max(1.0, float(np.max(np.abs(v))))
        const = float(np.ptp(v)) <= tol * scale
        at_max = np.flatnonzero(v >= v.max() - tol * scale)
        at_min = np.flatnonzero(v <= v.min() + tol * scale)
        strong[f.name] = {
            "constant": const,
            "max_at": [allpts[i] for i in at_max],
            "ok": bool(const or (np.all(at_max >= nb) and np.all(at_min >= nb))),
        }
        vb = v[nb:]
        weak[f.name] = {"sup": float(v.max()), "sup_boundary": float(vb.max()),
                        "inf": float(v.min()), "inf_boundary": float(vb.min()),
                        "ok": bool(v.max() <= vb.max() + tol * scale and v.min() >= vb.min() - tol * scale)}
    comparison = []
    names = list(values)
    for i in names:
        for j in names:
            if i == j:
                continue
            vi, vj = values[i], values[j]
            if np.all(vi[nb:] >= vj[nb:]):
                comparison.append({"upper": i, "lower": j, "ok": bool(np.all(vi >= vj - tol))})
    dim = None
    if basis is not None:
        pts = interior if probe_points is None else probe_points
        dim = dimension_probe(space, basis, pts, omega)
    passed = all(s["ok"] for s in strong.values()) and all(w["ok"] for w in weak.values()) \
        and all(c["ok"] for c in comparison)
    return PrincipleReport(strong, weak, comparison, dim, passed)
