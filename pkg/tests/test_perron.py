import numpy as np
import pytest
from hypothesis import given, strategies as st

from harmonic_mvp import functions as fn
from harmonic_mvp.errors import BallEscapesDomain, InputError, PreconditionError
from harmonic_mvp.perron import (BarrierCandidate, SubharmonicFamilyPlan,
                                 boundary_regularity_check, default_schedule,
                                 harmonic_modification, lower_perron, min_spacing, nn_defects,
                                 verify_barrier)
from harmonic_mvp.reproduce import perron_benchmark
from harmonic_mvp.space import discretize

from conftest import line

N = 40


@pytest.fixture(scope="module")
def grid():
    """Unit interval with spacing 1/40 and uniform masses."""
    sp = discretize(line("lebesgue"), 0.0, 1.0, 1.0 / N)
    return sp, list(range(1, N))


@pytest.fixture(scope="module")
def benchmark():
    space, omega, g, plan, approach = perron_benchmark()
    P, trace = lower_perron(space, omega, g, plan)
    return space, omega, g, plan, approach, P, trace


def random_convex(rng, n):
    """Discrete convex samples: increasing slopes."""
    slopes = np.sort(rng.normal(size=n - 1))
    return np.concatenate([[0.0], np.cumsum(slopes)]) + rng.normal()


# -- harmonic modification -----------------------------------------------------------

def test_min_spacing(grid):
    sp, _ = grid
    assert min_spacing(sp) == pytest.approx(1 / N)


def test_modification_of_constant(grid):
    sp, omega = grid
    f = fn.FieldFunction(values=np.full(sp.size, 3.0))
    mod = harmonic_modification(sp, f, 20, 0.3, omega)
    np.testing.assert_allclose(mod.values, 3.0, atol=1e-13)


def test_modification_of_square_is_flat():
    sp = discretize(line("lebesgue"), -1.0, 1.0, 0.025)
    omega = list(range(1, sp.size - 1))
    f = fn.square().sample(sp.coords)
    centre = int(np.argmin(np.abs(sp.coords)))
    mod = harmonic_modification(sp, f, centre, 0.5, omega)
    inside = np.abs(sp.coords) < 0.5
    np.testing.assert_allclose(mod.values[inside], 0.25, atol=1e-12)
    assert np.all(mod.values >= f.values - 1e-15)
    np.testing.assert_array_equal(mod.values[~inside], f.values[~inside])


def test_modification_must_stay_inside(grid):
    sp, omega = grid
    f = fn.FieldFunction(values=np.zeros(sp.size))
    with pytest.raises(BallEscapesDomain):
        harmonic_modification(sp, f, 2, 0.2, omega)


# -- lower Perron -------------------------------------------------------------------

def test_constant_data(grid):
    sp, omega = grid
    P, trace = lower_perron(sp, omega, {0: 1.5, N: 1.5}, SubharmonicFamilyPlan([fn.constant(1.5)]))
    np.testing.assert_allclose(P.values, 1.5, atol=1e-12)


def test_benchmark_recovers_identity(benchmark):
    space, omega, g, plan, approach, P, trace = benchmark
    assert np.max(np.abs(P.values[omega] - space.coords[omega])) < 1e-6
    assert max(trace.round_max) <= trace.sup_g + 1e-12


def test_benchmark_defect_decreases(benchmark):
    # the t = 1 generator is already the solution, so only roundoff moves
    trace = benchmark[-1]
    d = trace.round_defect
    assert all(b <= a + 1e-14 for a, b in zip(d, d[1:]))
    assert d[-1] < 1e-6


def test_defect_decreases_without_exact_generator(benchmark):
    space, omega, g = benchmark[:3]
    plan = SubharmonicFamilyPlan([fn.affine(1.0, -1.0 + t) for t in np.linspace(0, 0.9, 10)], rounds=4)
    _, trace = lower_perron(space, omega, g, plan)
    d = trace.round_defect
    assert all(b < a for a, b in zip(d, d[1:]))


def test_intermediate_tables_obey_weak_maximum(benchmark):
    space, omega, g, plan, approach, P, trace = benchmark
    for table in trace.tables:
        assert np.nanmax(table[omega]) <= max(g.values()) + 1e-12
        assert np.nanmin(table[omega]) >= min(g.values()) - 1e-12
    # modifications only ever raise a subharmonic table
    assert np.min(np.diff(trace.round_max)) >= -1e-12


def test_generators_must_be_admissible(grid):
    sp, omega = grid
    g = {0: 0.0, N: 1.0}
    with pytest.raises(PreconditionError, match="exceeds g"):
        lower_perron(sp, omega, g, SubharmonicFamilyPlan([fn.constant(0.5)]))
    with pytest.raises(PreconditionError, match="not subharmonic"):
        lower_perron(sp, omega, g, SubharmonicFamilyPlan([-fn.square() * 4.0]))


def test_empty_plan(grid):
    sp, omega = grid
    with pytest.raises(InputError):
        lower_perron(sp, omega, {0: 0.0, N: 1.0}, SubharmonicFamilyPlan([]))


def test_default_schedule_stays_inside(grid):
    sp, omega = grid
    for c, r in default_schedule(sp, omega):
        assert r < min(sp.coords[c], 1 - sp.coords[c]) - 1e-12


# -- barriers and regularity ---------------------------------------------------------

def test_barrier_examples(grid):
    sp, omega = grid
    assert verify_barrier(sp, omega, BarrierCandidate(fn.affine(-1.0, 0.0), 0)).valid
    assert verify_barrier(sp, omega, BarrierCandidate(fn.affine(1.0, -1.0), N)).valid
    zero = verify_barrier(sp, omega, BarrierCandidate(fn.constant(0.0), 0))
    assert not zero.valid and not zero.negative_elsewhere


def test_barrier_on_the_line():
    sp = line("lebesgue")
    assert verify_barrier(sp, (0.0, 1.0), BarrierCandidate(fn.affine(-1.0, 0.0), 0.0)).valid
    bumped = verify_barrier(sp, (0.0, 1.0), BarrierCandidate(-fn.square() - fn.affine(1.0, 0.0), 0.0))
    assert not bumped.subharmonic


def test_regularity_constant_data(grid):
    sp, omega = grid
    P, _ = lower_perron(sp, omega, {0: 2.0, N: 2.0}, SubharmonicFamilyPlan([fn.constant(2.0)]))
    rep = boundary_regularity_check(sp, omega, {0: 2.0, N: 2.0}, BarrierCandidate(fn.affine(-1.0, 0.0), 0),
                                    [8, 4, 2, 1], perron=P)
    assert all(dev <= 1e-4 for _, _, dev in rep.rows)
    assert rep.passed


def test_regularity_benchmark_deviation_tracks_distance(benchmark):
    space, omega, g, plan, approach, P, trace = benchmark
    rep = boundary_regularity_check(space, omega, g, BarrierCandidate(fn.affine(-1.0, 0.0), 0),
                                    approach, perron=P)
    assert rep.monotone
    for _, d, dev in rep.rows:
        assert dev == pytest.approx(d, abs=1e-6)


def test_regularity_needs_barrier(grid):
    sp, omega = grid
    with pytest.raises(PreconditionError):
        boundary_regularity_check(sp, omega, {0: 0.0, N: 1.0}, None, [1])


# -- properties ---------------------------------------------------------------------

seeds = st.integers(0, 2 ** 32 - 1)


@given(seeds)
def test_max_of_subharmonic_is_subharmonic(seed):
    rng = np.random.default_rng(seed)
    sp = discretize(line("lebesgue"), 0.0, 1.0, 1.0 / 30)
    omega = np.arange(1, 30)
    a, b = random_convex(rng, sp.size), random_convex(rng, sp.size)
    for v in (a, b):
        assert nn_defects(sp, v, omega).min() >= -1e-12
    assert nn_defects(sp, np.maximum(a, b), omega).min() >= -1e-12


@given(seeds)
def test_modification_keeps_subharmonicity_and_order(seed):
    rng = np.random.default_rng(seed)
    sp = discretize(line("lebesgue"), 0.0, 1.0, 1.0 / 30)
    omega = list(range(1, 30))
    f = random_convex(rng, sp.size)
    h = f - rng.uniform(0, 1, sp.size)
    c = int(rng.integers(5, 26))
    r = float(rng.uniform(0.04, 0.9 * min(sp.coords[c], 1 - sp.coords[c])))
    mf = harmonic_modification(sp, fn.FieldFunction(values=f), c, r, omega).values
    mh = harmonic_modification(sp, fn.FieldFunction(values=h), c, r, omega).values
    tol = 1e-11 * max(1.0, np.max(np.abs(f)))
    assert np.all(mf >= f - tol)
    assert np.all(mf >= mh - tol)
    assert nn_defects(sp, mf, omega).min() >= -tol
