"""Boundary strips and fixed-point solvers for the averaging Dirichlet problem.

All solvers work on a :class:`~harmonic_mvp.space.DiscreteSpace`; analytic
lines are handled by discretising them first (:func:`space.discretize`).

The iterations are Jacobi sweeps ``u_{i+1} = T u_i``.  They are carried out
in increment form: with ``delta_i = u_{i+1} - u_i`` one has
``delta_{i+1} = Lambda P delta_i`` where ``P`` is the nonnegative averaging
matrix restricted to the interior.  The first increment is a nonnegative
combination of ``F - c`` (``c`` the seed), so every increment keeps its sign
in floating point and the monotonicity of the iterates holds exactly rather
than up to rounding.  The direct residual ``max |T u - u|`` is recomputed at
every step and is what the stopping rule checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order

from .errors import ConvergenceError, DegenerateProblem, InputError, PreconditionError
from .functions import FieldFunction
from .space import DiscreteSpace

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 100_000


def _require_discrete(space):
    if not isinstance(space, DiscreteSpace):
        raise InputError("the Dirichlet solvers need a discrete space; discretize the line first")


def _node_array(space, nodes, what) -> np.ndarray:
    arr = np.unique(np.asarray([space.check_point(v) for v in nodes], dtype=int))
    if arr.size == 0:
        raise InputError(f"{what} is empty")
    return arr


def nearest_exterior(space: DiscreteSpace, omega) -> np.ndarray:
    """Exterior nodes that are nearest to at least one node of ``omega``.

    This is the discrete stand-in for the topological boundary.
    """
    inside = np.zeros(space.size, dtype=bool)
    inside[omega] = True
    ext = np.flatnonzero(~inside)
    if ext.size == 0:
        return ext
    sub = space.metric[np.ix_(omega, ext)]
    hits = sub == sub.min(axis=1, keepdims=True)
    return ext[hits.any(axis=0)]


@dataclass(frozen=True)
class BoundaryStrip:
    """Domain nodes and the strip carrying the boundary data.

    Attributes
    ----------
    omega : node ids of the domain
    gamma_eps : exterior nodes within ``eps`` of ``omega``
    boundary : the boundary nodes (a subset of ``gamma_eps``)
    gamma_eps_eps : all nodes within ``eps`` of ``boundary``
    eps : strip width
    """

    omega: np.ndarray
    gamma_eps: np.ndarray
    boundary: np.ndarray
    gamma_eps_eps: np.ndarray
    eps: float

    @property
    def omega_eps(self) -> np.ndarray:
        return np.union1d(self.omega, self.gamma_eps)


def boundary_strip(space: DiscreteSpace, omega, eps: float, boundary=None) -> BoundaryStrip:
    """Build the strip ``{x outside omega : dist(x, omega) <= eps}``.

    ``boundary`` defaults to :func:`nearest_exterior`; an explicit list must
    lie in the strip.
    """
    _require_discrete(space)
    eps = float(eps)
    if not eps > 0:
        raise InputError("eps must be positive")
    omega = _node_array(space, omega, "omega")
    inside = np.zeros(space.size, dtype=bool)
    inside[omega] = True
    ext = np.flatnonzero(~inside)
    if ext.size == 0:
        raise InputError("no boundary strip: omega is the whole space")
    dist = space.metric[np.ix_(ext, omega)].min(axis=1)
    gamma = ext[dist <= eps]
    if gamma.size == 0:
        raise InputError(f"no boundary strip: no exterior node within {eps:g} of omega")
    if boundary is None:
        bnd = nearest_exterior(space, omega)
    else:
        bnd = _node_array(space, boundary, "boundary")
    if not np.all(np.isin(bnd, gamma)):
        raise InputError("boundary nodes must lie in the strip")
    near = space.metric[:, bnd].min(axis=1) <= eps
    return BoundaryStrip(omega, gamma, bnd, np.flatnonzero(near), eps)


def _data_array(space, data, what) -> np.ndarray:
    """Turn ``{node: value}``, a full-length array or a FieldFunction into an array with NaN gaps."""
    out = np.full(space.size, np.nan)
    if isinstance(data, FieldFunction):
        return np.asarray(space.values(data), dtype=float)
    if isinstance(data, Mapping):
        for k, v in data.items():
            out[space.check_point(int(k))] = float(v)
        return out
    arr = np.asarray(data, dtype=float)
    if arr.shape != (space.size,):
        raise InputError(f"{what} must have one entry per node")
    return arr.copy()


@dataclass
class DirichletProblem:
    """Averaging Dirichlet problem on a discrete space.

    ``F`` holds one value per node; entries off the nodes that need data are
    ignored and may be NaN.  ``variant`` is ``"measurable"`` (data on
    ``gamma_eps``) or ``"continuous"`` (data on ``gamma_eps`` and on
    ``gamma_eps_eps``, blended near the boundary).
    """

    space: DiscreteSpace
    strip: BoundaryStrip
    F: np.ndarray
    tol: float = DEFAULT_TOL
    max_iters: int = DEFAULT_MAX_ITERS
    variant: str = "measurable"

    def __post_init__(self):
        _require_discrete(self.space)
        if self.variant not in ("measurable", "continuous"):
            raise InputError(f"unknown variant {self.variant!r}")
        if not self.tol > 0:
            raise InputError("tol must be positive")
        if int(self.max_iters) < 1:
            raise InputError("max_iters must be at least 1")
        self.F = _data_array(self.space, self.F, "F")
        need = self.data_nodes
        if not np.all(np.isfinite(self.F[need])):
            missing = need[~np.isfinite(self.F[need])]
            raise InputError(f"boundary data missing or non-finite at nodes {missing.tolist()}")

    @property
    def fixed_nodes(self) -> np.ndarray:
        """Nodes whose values are prescribed."""
        if self.variant == "measurable":
            return self.strip.gamma_eps
        return np.setdiff1d(np.union1d(self.strip.gamma_eps, self.strip.gamma_eps_eps), self.strip.omega)

    @property
    def data_nodes(self) -> np.ndarray:
        """Nodes where ``F`` is read."""
        if self.variant == "measurable":
            return self.strip.gamma_eps
        return np.union1d(self.fixed_nodes, np.intersect1d(self.strip.gamma_eps_eps, self.strip.omega))

    @property
    def sup_abs_data(self) -> float:
        return float(np.max(np.abs(self.F[self.data_nodes])))

    # -- constructors -------------------------------------------------------
    @classmethod
    def measurable(cls, space, omega, eps, g, boundary=None, **kw) -> "DirichletProblem":
        """Data ``g`` on the boundary nodes, extended by zero to the rest of the strip."""
        strip = boundary_strip(space, omega, eps, boundary)
        gv = _data_array(space, g, "g")
        if not np.all(np.isfinite(gv[strip.boundary])):
            raise InputError("g must be given at every boundary node")
        F = np.full(space.size, np.nan)
        F[strip.gamma_eps] = 0.0
        F[strip.boundary] = gv[strip.boundary]
        return cls(space, strip, F, variant="measurable", **kw)

    @classmethod
    def continuous(cls, space, omega, eps, g, boundary=None, **kw) -> "DirichletProblem":
        """Data ``g`` on the boundary, extended to the strip by the nearest boundary value.

        Ties between equally near boundary nodes are averaged.  The
        extension is bounded by ``sup |g|`` and agrees with ``g`` on the
        boundary.
        """
        strip = boundary_strip(space, omega, eps, boundary)
        gv = _data_array(space, g, "g")
        gb = gv[strip.boundary]
        if not np.all(np.isfinite(gb)):
            raise InputError("g must be given at every boundary node")
        F = np.full(space.size, np.nan)
        D = space.metric[:, strip.boundary]
        closest = D == D.min(axis=1, keepdims=True)
        ext = (closest * gb[None, :]).sum(axis=1) / closest.sum(axis=1)
        F[:] = ext
        F[strip.boundary] = gb
        return cls(space, strip, F, variant="continuous", **kw)


@dataclass
class SolveTrace:
    """Per-iteration record of a fixed-point run.

    ``deltas[i]`` is ``max |u_{i+1} - u_i|`` and ``residuals[i]`` the direct
    residual of ``u_{i+1}``; ``min_increments`` and ``max_increments`` give
    the extreme signed increments, and ``max_abs`` the sup-norm of each
    iterate.  ``iterates`` is filled only when recording was requested and
    starts with the seed.
    """

    deltas: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    min_increments: list = field(default_factory=list)
    max_increments: list = field(default_factory=list)
    max_abs: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    nodes: np.ndarray | None = None
    u: np.ndarray | None = None
    iterations: int = 0
    converged: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def residual(self) -> float:
        return self.residuals[-1] if self.residuals else math.nan

    def rows(self):
        """``(iter, sup_delta, residual)`` rows for CSV output."""
        return [(i + 1, d, r) for i, (d, r) in enumerate(zip(self.deltas, self.residuals))]


@dataclass
class _Operator:
    work: np.ndarray        # node ids of the working set
    interior: np.ndarray    # positions (in work) of the domain nodes
    fixed: np.ndarray       # positions (in work) of prescribed nodes
    P: np.ndarray           # averaging weights, rows = interior, cols = work
    lam: np.ndarray         # blend weight per interior row
    F_int: np.ndarray       # data at interior nodes (only used where lam < 1)
    F_fix: np.ndarray       # data at fixed nodes


def _averaging_rows(space, centres, radii, work):
    """Row-stochastic weights of ``B(x, r_x)`` over the working set."""
    pos = -np.ones(space.size, dtype=int)
    pos[work] = np.arange(work.size)
    P = np.zeros((len(centres), work.size))
    for k, (x, r) in enumerate(zip(centres, radii)):
        members = np.flatnonzero(space.metric[x] < r)
        if np.any(pos[members] < 0):
            bad = members[pos[members] < 0]
            raise InputError(f"B({x}, {r:g}) reaches nodes {bad.tolist()} outside the working set")
        m = space.masses[members]
        P[k, pos[members]] = m / m.sum()
    return P


def _check_spacing(space, eps):
    h = space.grid_spacing
    if h is not None and h > eps / 4 * (1 + 1e-9):
        raise InputError(f"grid spacing {h:g} exceeds eps/4 = {eps / 4:g}")


def _build_operator(problem: DirichletProblem) -> _Operator:
    space, strip = problem.space, problem.strip
    fixed_nodes = problem.fixed_nodes
    work = np.union1d(strip.omega, fixed_nodes)
    pos = -np.ones(space.size, dtype=int)
    pos[work] = np.arange(work.size)
    interior = pos[strip.omega]
    fixed = pos[fixed_nodes]
    P = _averaging_rows(space, strip.omega, np.full(strip.omega.size, strip.eps), work)
    lam = np.ones(strip.omega.size)
    F_int = np.zeros(strip.omega.size)
    if problem.variant == "continuous":
        eps = strip.eps
        in_strip = np.isin(strip.omega, strip.gamma_eps_eps)
        d_gamma = space.metric[np.ix_(strip.omega, fixed_nodes)].min(axis=1)
        lam = np.where(in_strip, np.minimum(d_gamma / eps, 1.0), 1.0)
        F_int = np.where(in_strip, problem.F[strip.omega], 0.0)
    return _Operator(work, interior, fixed, P, lam, F_int, problem.F[fixed_nodes])


def _apply(op: _Operator, u: np.ndarray) -> np.ndarray:
    """``T u`` on the interior rows."""
    return (1.0 - op.lam) * op.F_int + op.lam * (op.P @ u)


def _check_reachable(op: _Operator):
    """Every interior node must reach prescribed data through chains of balls."""
    n = op.work.size
    rows, cols = np.nonzero(op.P)
    # edge from each neighbour back to the centre: search starts at the data
    src = list(cols)
    dst = list(op.interior[rows])
    sources = list(op.fixed) + list(op.interior[op.lam < 1.0])
    super_node = n
    src += [super_node] * len(sources)
    dst += list(sources)
    graph = csr_matrix((np.ones(len(src)), (src, dst)), shape=(n + 1, n + 1))
    seen = breadth_first_order(graph, super_node, directed=True, return_predecessors=False)
    hit = np.zeros(n + 1, dtype=bool)
    hit[seen] = True
    lost = op.work[op.interior[~hit[op.interior]]]
    if lost.size:
        raise DegenerateProblem(f"interior nodes {lost.tolist()} never see the boundary data")


def _iterate(op: _Operator, u0: np.ndarray, delta0: np.ndarray, tol: float, max_iters: int,
             record: bool, bounds, what: str) -> SolveTrace:
    """Run ``u_{i+1} = u_i + delta_i`` with ``delta_{i+1} = lam * P_II delta_i``."""
    trace = SolveTrace(nodes=op.work)
    u = u0.copy()
    lo, hi = bounds
    P_ii = op.P[:, op.interior]
    delta = delta0
    if record:
        trace.iterates.append(u.copy())
    for it in range(1, max_iters + 1):
        new_int = u[op.interior] + delta
        np.clip(new_int, lo, hi, out=new_int)
        step = new_int - u[op.interior]
        u[op.interior] = new_int
        res = float(np.max(np.abs(_apply(op, u) - new_int))) if new_int.size else 0.0
        sup_delta = float(np.max(np.abs(step))) if step.size else 0.0
        trace.deltas.append(sup_delta)
        trace.residuals.append(res)
        trace.min_increments.append(float(step.min()) if step.size else 0.0)
        trace.max_increments.append(float(step.max()) if step.size else 0.0)
        trace.max_abs.append(float(np.max(np.abs(u))))
        if record:
            trace.iterates.append(u.copy())
        trace.iterations = it
        if sup_delta < tol and res < tol:
            trace.converged = True
            break
        delta = op.lam * (P_ii @ delta)
    trace.u = u
    if not trace.converged:
        raise ConvergenceError(f"{what} did not converge in {max_iters} iterations "
                               f"(last delta {trace.deltas[-1]:.3g}, residual {trace.residuals[-1]:.3g})",
                               trace)
    return trace


def _as_function(space, work, u, name) -> FieldFunction:
    vals = np.full(space.size, np.nan)
    vals[work] = u
    return FieldFunction(values=vals, name=name)


def _seed(problem: DirichletProblem, op: _Operator, seed):
    data = problem.F[problem.data_nodes]
    if seed == "below":
        return float(data.min())
    if seed == "above":
        return float(data.max())
    return float(seed)


def _solve(problem: DirichletProblem, seed, record: bool, what: str):
    _check_spacing(problem.space, problem.strip.eps)
    op = _build_operator(problem)
    c = _seed(problem, op, seed)
    u0 = np.empty(op.work.size)
    u0[op.interior] = c
    u0[op.fixed] = op.F_fix
    # first increment as a sign-definite combination of (F - c)
    delta0 = (1.0 - op.lam) * (op.F_int - c) + op.lam * (op.P[:, op.fixed] @ (op.F_fix - c))
    data = problem.F[problem.data_nodes]
    lo, hi = min(c, float(data.min())), max(c, float(data.max()))
    trace = _iterate(op, u0, delta0, problem.tol, int(problem.max_iters), record, (lo, hi), what)
    trace.extra["seed"] = c
    return _as_function(problem.space, op.work, trace.u, what), trace


def dp_solve_measurable(problem: DirichletProblem, record: bool = False, seed="below"):
    """Fixed point of ``u = avg_{B(x, eps)} u`` in the domain, ``u = F`` on the strip.

    Starts from ``inf F`` on the domain, so the iterates increase to the
    solution and stay within ``[inf F, sup F]``.

    Returns
    -------
    u : FieldFunction
        Sampled solution (NaN outside the domain and strip).
    trace : SolveTrace
    """
    if problem.variant != "measurable":
        raise InputError("dp_solve_measurable needs a measurable-variant problem")
    return _solve(problem, seed, record, "dp-measurable")


def dp_solve_continuous(problem: DirichletProblem, record: bool = False, seed="below"):
    """Fixed point of the blended operator ``(1 - lam) F + lam avg_{B(x, eps)} u``.

    ``lam = dist(x, Gamma) / eps`` on domain nodes within ``eps`` of the
    boundary and ``1`` elsewhere, where ``Gamma`` is the set of prescribed
    nodes.  ``seed`` may be ``"below"`` (``inf F``), ``"above"``
    (``sup F``) or a number; the iterates are monotone in either case.
    """
    if problem.variant != "continuous":
        raise InputError("dp_solve_continuous needs a continuous-variant problem")
    return _solve(problem, seed, record, "dp-continuous")


def direct_solve_oracle(problem: DirichletProblem) -> FieldFunction:
    """Solve the fixed-point equation as a linear system.

    ``(I - Lambda P_II) u_I = (1 - Lambda) F_I + Lambda P_IG F_G``.
    Raises :class:`DegenerateProblem` when some interior node is not linked
    to the data or the system is numerically singular.
    """
    op = _build_operator(problem)
    _check_reachable(op)
    P_ii = op.P[:, op.interior]
    A = np.eye(op.interior.size) - op.lam[:, None] * P_ii
    b = (1.0 - op.lam) * op.F_int + op.lam * (op.P[:, op.fixed] @ op.F_fix)
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise DegenerateProblem(f"singular averaging system: {exc}") from None
    scale = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    if not np.all(np.isfinite(x)) or np.max(np.abs(A @ x - b), initial=0.0) > 1e-12 * scale * max(1, x.size):
        raise DegenerateProblem("linear solve did not reach the 1e-12 residual target")
    u = np.empty(op.work.size)
    u[op.interior] = x
    u[op.fixed] = op.F_fix
    return _as_function(problem.space, op.work, u, "oracle")


def subharmonic_lift(space: DiscreteSpace, omega, g, v: FieldFunction, boundary=None,
                     tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS,
                     pre_tol: float = 1e-10, record: bool = False):
    """Increase a subharmonic ``v`` to a fixed point of ``u -> avg_{B(x, r_x)} u``.

    ``r_x`` is half the distance from ``x`` to the boundary nodes.  The
    iterates start at ``v`` and increase; values on the boundary stay ``g``.
    The radii are returned in ``trace.extra["radii"]`` and form the
    admissible-radius witness of the result.

    Raises
    ------
    PreconditionError
        If ``v`` differs from ``g`` on the boundary or has a defect below
        ``-pre_tol`` at some ``r_x``.
    """
    _require_discrete(space)
    omega = _node_array(space, omega, "omega")
    bnd = nearest_exterior(space, omega) if boundary is None else _node_array(space, boundary, "boundary")
    if bnd.size == 0:
        raise InputError("the domain has no boundary nodes")
    work = np.union1d(omega, bnd)
    pos = -np.ones(space.size, dtype=int)
    pos[work] = np.arange(work.size)
    radii = 0.5 * space.metric[np.ix_(omega, bnd)].min(axis=1)
    P = _averaging_rows(space, omega, radii, work)
    op = _Operator(work, pos[omega], pos[bnd], P, np.ones(omega.size), np.zeros(omega.size), None)

    gv = _data_array(space, g, "g")[bnd]
    vv = space.values(v, work)
    if not np.all(np.isfinite(gv)):
        raise InputError("g must be given at every boundary node")
    if np.max(np.abs(vv[op.fixed] - gv)) > pre_tol:
        raise PreconditionError("v does not match g on the boundary")
    defect = P @ vv - vv[op.interior]
    if defect.min() < -pre_tol:
        k = int(np.argmin(defect))
        raise PreconditionError(f"v is not subharmonic at node {omega[k]} "
                                f"(defect {defect[k]:.3g} at radius {radii[k]:g})")
    u0 = vv.copy()
    u0[op.fixed] = gv
    delta0 = np.maximum(P @ u0 - u0[op.interior], 0.0)
    lo, hi = float(np.min(u0)), float(max(np.max(u0), np.max(gv)))
    trace = _iterate(op, u0, delta0, tol, int(max_iters), record, (lo, hi), "subharmonic-lift")
    trace.extra["radii"] = dict(zip(omega.tolist(), radii.tolist()))
    return _as_function(space, work, trace.u, "lift"), trace
