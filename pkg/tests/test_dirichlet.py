import numpy as np
import pytest
from hypothesis import given, strategies as st

from harmonic_mvp import functions as fn
from harmonic_mvp.dirichlet import (DirichletProblem, boundary_strip, direct_solve_oracle,
                                    dp_solve_continuous, dp_solve_measurable, nearest_exterior,
                                    subharmonic_lift)
from harmonic_mvp.errors import (ConvergenceError, DegenerateProblem, InputError,
                                 PreconditionError)
from harmonic_mvp.meanvalue import ball_average
from harmonic_mvp.space import DiscreteSpace, discretize

from conftest import line, random_problem


def unit_grid(h=0.05, lo=0.0, hi=1.0):
    return discretize(line("lebesgue"), lo, hi, h)


def interior(space, a, b):
    return [int(i) for i in np.flatnonzero((space.coords > a) & (space.coords < b))]


# -- strips ------------------------------------------------------------------------

def test_path_strip(path3):
    s = boundary_strip(path3, [1], 1.5)
    assert s.gamma_eps.tolist() == [0, 2]
    assert s.boundary.tolist() == [0, 2]


def test_strip_too_thin(path3):
    with pytest.raises(InputError, match="no boundary strip"):
        boundary_strip(path3, [1], 0.5)


def test_grid_strip():
    sp = unit_grid()
    s = boundary_strip(sp, interior(sp, 0, 1), 0.1)
    assert s.gamma_eps.tolist() == [0, 20]

    wide = unit_grid(lo=-0.2, hi=1.2)
    s2 = boundary_strip(wide, interior(wide, 0, 1), 0.1)
    np.testing.assert_allclose(np.sort(wide.coords[s2.gamma_eps]), [-0.05, 0.0, 1.0, 1.05], atol=1e-12)


def test_nearest_exterior(path3):
    assert nearest_exterior(path3, [1]).tolist() == [0, 2]


# -- measurable solver --------------------------------------------------------------

def test_three_path_fixed_point(path3):
    pb = DirichletProblem.measurable(path3, [1], 1.5, {0: 0.0, 2: 1.0}, tol=1e-14)
    u, trace = dp_solve_measurable(pb, record=True)
    assert u.values[1] == pytest.approx(0.5, abs=1e-13)
    assert trace.iterates[0][1] == 0.0
    assert trace.iterates[1][1] == pytest.approx(1 / 3, abs=1e-16)
    assert trace.iterates[2][1] == pytest.approx(4 / 9, abs=1e-16)
    assert direct_solve_oracle(pb).values[1] == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("solver,ctor", [(dp_solve_measurable, DirichletProblem.measurable),
                                         (dp_solve_continuous, DirichletProblem.continuous)])
def test_constant_data_gives_constant(solver, ctor):
    sp = unit_grid()
    pb = ctor(sp, interior(sp, 0, 1), 0.2, {0: 2.5, 20: 2.5})
    u, _ = solver(pb)
    m = np.isfinite(u.values)
    np.testing.assert_allclose(u.values[m], 2.5, atol=1e-12)
    np.testing.assert_allclose(direct_solve_oracle(pb).values[m], 2.5, atol=1e-12)


def test_non_convergence_carries_trace(path3):
    pb = DirichletProblem.measurable(path3, [1], 1.5, {0: 0.0, 2: 1.0}, tol=1e-14, max_iters=3)
    with pytest.raises(ConvergenceError) as info:
        dp_solve_measurable(pb)
    assert len(info.value.trace.deltas) == 3


def test_spacing_guard():
    sp = unit_grid(h=0.1)
    pb = DirichletProblem.measurable(sp, interior(sp, 0, 1), 0.2, {0: 0.0, 10: 1.0})
    with pytest.raises(InputError, match="eps/4"):
        dp_solve_measurable(pb)


def test_oracle_flags_unreachable_nodes():
    # node 3 is far from everything, so its ball holds only itself
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [10.0, 0.0]])
    sp = DiscreteSpace.from_points(pts, [1.0, 1.0, 1.0, 1.0])
    pb = DirichletProblem.measurable(sp, [1, 3], 1.5, {0: 0.0, 2: 1.0})
    with pytest.raises(DegenerateProblem):
        direct_solve_oracle(pb)


def test_missing_boundary_value(path3):
    with pytest.raises(InputError):
        DirichletProblem.measurable(path3, [1], 1.5, {0: 0.0})


# -- continuous solver ---------------------------------------------------------------

def benchmark_problem(tol=1e-12):
    sp = unit_grid()
    return DirichletProblem.continuous(sp, interior(sp, 0, 1), 0.2, {0: 0.0, 20: 1.0}, tol=tol)


def test_continuous_benchmark_matches_oracle():
    pb = benchmark_problem()
    u, trace = dp_solve_continuous(pb)
    o = direct_solve_oracle(pb)
    m = np.isfinite(o.values)
    assert np.max(np.abs(u.values[m] - o.values[m])) < 1e-8
    assert np.all(np.diff(u.values[m]) >= -1e-12)
    assert min(trace.min_increments) >= 0


def test_continuous_seeds_agree():
    pb = benchmark_problem()
    lo, _ = dp_solve_continuous(pb, seed="below")
    hi, _ = dp_solve_continuous(pb, seed="above")
    m = np.isfinite(lo.values)
    assert np.max(np.abs(lo.values[m] - hi.values[m])) < 1e-8
    assert lo.values[0] == 0.0 and lo.values[20] == 1.0


# -- subharmonic lift ----------------------------------------------------------------

def lift_problem(h=0.05):
    sp = unit_grid(h, -1.0, 1.0)
    omega = interior(sp, -1, 1)
    n = sp.size - 1
    return sp, omega, {0: 1.0, n: 1.0}


def test_lift_of_square():
    sp, omega, g = lift_problem()
    v = fn.square()
    u, trace = subharmonic_lift(sp, omega, g, v, tol=1e-12, record=True)
    vv = v(sp.coords)
    assert np.all(u.values >= vv - 1e-15)
    assert min(trace.min_increments) >= 0
    for x, r in trace.extra["radii"].items():
        assert abs(ball_average(sp, u, x, r) - u.values[x]) < 1e-6


def test_lift_fixes_harmonic_functions():
    sp, omega, _ = lift_problem()
    v = fn.affine(0.5, 1.0)
    g = {0: float(v(-1.0)), sp.size - 1: float(v(1.0))}
    u, trace = subharmonic_lift(sp, omega, g, v, tol=1e-12)
    np.testing.assert_allclose(u.values, v(sp.coords), atol=1e-12)


def test_lift_preconditions():
    sp, omega, g = lift_problem()
    with pytest.raises(PreconditionError, match="boundary"):
        subharmonic_lift(sp, omega, g, fn.square() + 1.0)
    with pytest.raises(PreconditionError, match="subharmonic"):
        subharmonic_lift(sp, omega, {0: -1.0, sp.size - 1: -1.0}, -fn.square())


# -- properties ---------------------------------------------------------------------

seeds = st.integers(0, 2 ** 32 - 1)


@given(seeds)
def test_dp_matches_oracle_and_is_monotone(seed):
    rng = np.random.default_rng(seed)
    pb = random_problem(rng, n=int(rng.integers(5, 16)))
    u, trace = dp_solve_measurable(pb, record=True)
    o = direct_solve_oracle(pb)
    m = np.isfinite(o.values)
    assert np.max(np.abs(u.values[m] - o.values[m])) < 10 * pb.tol + 1e-11
    assert min(trace.min_increments) >= 0
    assert max(trace.max_abs) <= pb.sup_abs_data
    fixed = pb.fixed_nodes
    # data nodes are never touched
    assert np.array_equal(u.values[fixed], pb.F[fixed])
    # discrete maximum principle
    assert np.nanmax(u.values) <= np.max(pb.F[fixed]) and np.nanmin(u.values) >= np.min(pb.F[fixed])


@given(seeds)
def test_comparison_of_solutions(seed):
    rng = np.random.default_rng(seed)
    pb = random_problem(rng, n=int(rng.integers(5, 16)))
    bnd = pb.strip.boundary
    g1 = {int(i): float(pb.F[i]) for i in bnd}
    g2 = {i: v + float(rng.uniform(0, 2)) for i, v in g1.items()}
    p2 = DirichletProblem.measurable(pb.space, pb.strip.omega, pb.strip.eps, g2, tol=pb.tol)
    u1, _ = dp_solve_measurable(pb)
    u2, _ = dp_solve_measurable(p2)
    m = np.isfinite(u1.values)
    assert np.all(u1.values[m] <= u2.values[m] + 1e-11)
