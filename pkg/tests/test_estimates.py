import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from harmonic_mvp import functions as fn
from harmonic_mvp.dirichlet import DirichletProblem, dp_solve_measurable
from harmonic_mvp.errors import BallEscapesDomain, InputError
from harmonic_mvp.estimates import (annular_ball_bound, ball_chain, constant_sheet,
                                    dimension_probe, empirical_harnack, empirical_modulus,
                                    liouville_scan, measured_doubling, pointwise_dilatation,
                                    principle_checks)
from harmonic_mvp.meanvalue import harmonic_defect
from harmonic_mvp.space import SamplePlan, discretize, measure_diagnostics

from conftest import line


# -- constant sheet ------------------------------------------------------------------

def test_sheet_examples():
    assert constant_sheet(2.0).harnack_strong == 8.0
    assert constant_sheet(2.0, r_M=3.0, r_m=1.0).harnack_weak_ball == pytest.approx(10.0, rel=1e-14)
    assert constant_sheet(2.0, t=5.0).holder_alpha == pytest.approx(math.log(4 / 3) / math.log(5), abs=1e-12)
    assert constant_sheet(2.0, Q=1.0, M=1.0, dist=0.5).lipschitz_uniform == pytest.approx(8.0)


def test_sheet_compact_chain():
    s = constant_sheet(2.0, r_M=3.0, r_m=1.0, n=3)
    assert s.harnack_compact_weak == pytest.approx(1000.0, rel=1e-12)


def test_sheet_input_validation():
    with pytest.raises(InputError):
        constant_sheet(1.0)
    with pytest.raises(InputError):
        constant_sheet(2.0, t=3.0)
    with pytest.raises(InputError):
        constant_sheet(2.0, delta=1.5)
    with pytest.raises(InputError):
        constant_sheet(2.0, r_M=1.0, r_m=2.0)


def test_sheet_large_scale_defaults():
    s = constant_sheet(2.0, f_L1=3.0, mu_2r=4.0, r=1.0)
    assert s.large_scale_c == pytest.approx(1.0 * 16.0 * 3.0 / 4.0)
    assert s.large_scale_gap == pytest.approx(4 ** (1 / 3) - 1)


@given(st.floats(1.01, 50.0), st.floats(1.01, 50.0))
def test_harnack_constant_increases_in_doubling(a, b):
    lo, hi = sorted((a, b))
    assert constant_sheet(lo).harnack_strong <= constant_sheet(hi).harnack_strong


@given(st.floats(1.01, 50.0), st.floats(1.01, 50.0), st.floats(4.01, 100.0), st.floats(4.01, 100.0))
def test_holder_exponent_decreases(c1, c2, t1, t2):
    (clo, chi), (tlo, thi) = sorted((c1, c2)), sorted((t1, t2))
    assert constant_sheet(clo, t=tlo).holder_alpha >= constant_sheet(clo, t=thi).holder_alpha
    assert constant_sheet(clo, t=tlo).holder_alpha >= constant_sheet(chi, t=tlo).holder_alpha


# -- Harnack ------------------------------------------------------------------------

def test_harnack_constant_function(lebesgue):
    res = empirical_harnack(lebesgue, fn.constant(2.0), 0.0, 1.0, C_mu=2.0)
    assert res.ratio == 1.0 and res.passed


def test_harnack_affine_on_grid():
    sp = discretize(line("lebesgue"), 0.0, 10.0, 0.05)
    omega = list(range(1, sp.size - 1))
    f = fn.affine(1.0, 10.0)
    x = int(np.argmin(np.abs(sp.coords - 5.0)))
    res = empirical_harnack(sp, f, x, 0.7, omega=omega, C_mu=2.0)
    members = sp.ball_members(x, 0.7)
    vals = f(sp.coords[members])
    assert res.ratio == pytest.approx(vals.max() / vals.min())
    assert res.ratio <= 8.0


def test_harnack_dp_solution_shifted():
    sp = discretize(line("lebesgue"), 0.0, 1.0, 0.02)
    omega = list(range(1, sp.size - 1))
    pb = DirichletProblem.measurable(sp, omega, 0.1, {0: 0.0, sp.size - 1: 1.0}, tol=1e-12)
    u, _ = dp_solve_measurable(pb)
    f = fn.FieldFunction(values=u.values + 1.0)
    res = empirical_harnack(sp, f, 25, 0.06, omega=omega, C_mu=2.0)
    assert res.passed


def test_harnack_requires_room(lebesgue):
    with pytest.raises(BallEscapesDomain):
        empirical_harnack(lebesgue, fn.constant(1.0), 0.5, 0.1, omega=(0.0, 1.0))
    with pytest.raises(InputError):
        empirical_harnack(lebesgue, fn.affine(1.0, 0.0), 0.0, 0.1)


def test_harnack_rejects_non_harmonic(lebesgue):
    with pytest.raises(InputError, match="not harmonic"):
        empirical_harnack(lebesgue, fn.square() + 1.0, 0.0, 0.5, harmonic_tol=1e-8)


def test_measured_doubling_lebesgue(lebesgue):
    assert measured_doubling(lebesgue, 0.0, 1.0) == pytest.approx(2.0)


def test_ball_chain_overlaps():
    chain = ball_chain(np.linspace(0, 1, 101), 0.25)
    assert chain[0] == 0.0
    assert np.all(np.diff(chain) < 0.25)
    assert chain[-1] > 1 - 0.25


# -- moduli -------------------------------------------------------------------------

def test_modulus_of_identity(lebesgue):
    pairs = [(0.0, d) for d in np.geomspace(1e-4, 1, 20)]
    fit = empirical_modulus(lebesgue, fn.affine(1.0, 0.0), pairs)
    assert fit.exponent == pytest.approx(1.0, abs=1e-8)
    assert fit.constant == pytest.approx(1.0, abs=1e-8)


def test_modulus_of_constant_is_degenerate(lebesgue):
    fit = empirical_modulus(lebesgue, fn.constant(4.0), [(0.0, 0.5), (0.0, 0.1)])
    assert fit.degenerate and fit.constant == 0.0


def test_modulus_noise_floor(lebesgue):
    fit = empirical_modulus(lebesgue, fn.affine(1.0, 0.0), [(0.0, 1e-8), (0.0, 0.5), (0.0, 0.1)])
    assert fit.skipped == 1


def test_annular_ball_bound_holds_for_entire_function(exp_neg_x):
    rep = measure_diagnostics(exp_neg_x, SamplePlan(np.linspace(-1.5, 2.5, 5), np.geomspace(0.1, 3, 8)))
    assert rep.annular_fit is not None
    x0, r = 0.5, 1.0
    f = fn.one_plus_exp2x()
    ys = np.linspace(x0 - 3 * r, x0 + 3 * r, 601)
    sheet = constant_sheet(rep.doubling_constant, delta=1.0, A=rep.annular_fit.A,
                           f_sup=float(np.max(np.abs(f(ys)))))
    bound = annular_ball_bound(sheet, r)
    pts = np.linspace(0.0, 1.0, 21)
    pairs = [(a, b) for a in pts for b in pts if a < b]
    fit = empirical_modulus(exp_neg_x, f, pairs, bound=bound)
    assert fit.worst_ratio <= 1.0


# -- Liouville ----------------------------------------------------------------------

def test_liouville_lebesgue(lebesgue):
    scan = liouville_scan(lebesgue, 0.0, 1.0, [10.0])
    assert scan.ratios[0] == pytest.approx(0.1, abs=1e-15)
    full = liouville_scan(lebesgue, 0.0, 1.0)
    assert np.max(np.abs(full.ratios - 1 / full.radii)) < 1e-12
    assert full.liminf < 1e-3


def test_liouville_two_cosh(two_cosh):
    scan = liouville_scan(two_cosh, 0.0, 1.0)
    expected = math.sinh(1) / np.tanh(scan.radii)
    np.testing.assert_allclose(scan.ratios, expected, rtol=1e-9)
    assert scan.liminf > 1


def test_liouville_exp_neg_x(exp_neg_x):
    scan = liouville_scan(exp_neg_x, 0.0, 1.0, np.linspace(2, 300, 40))
    r = scan.radii
    expected = (1 - math.exp(-1)) / np.tanh(r)
    np.testing.assert_allclose(scan.ratios, expected, rtol=1e-10)


def test_liouville_bounded_harmonic_witness(two_cosh):
    f = fn.logistic_inv()
    grid = [(x, r) for x in np.linspace(-2, 2, 10) for r in np.linspace(0.1, 3, 10)]
    assert max(abs(harmonic_defect(two_cosh, f, x, r)) for x, r in grid) < 1e-8
    assert liouville_scan(two_cosh, 0.0, 1.0).liminf > 1


def test_liouville_radii_validation(lebesgue):
    with pytest.raises(InputError):
        liouville_scan(lebesgue, 0.0, 1.0, [0.5, 2.0])
    with pytest.raises(InputError):
        liouville_scan(lebesgue, 0.0, 1.0, [3.0, 2.0])


@given(st.sampled_from(["lebesgue", "exp_neg_x", "two_cosh", "abs_x", "exp_neg_abs_x"]),
       st.floats(-3, 3), st.floats(0.05, 2.0))
def test_liouville_containment(wid, x, d):
    sp = line(wid)
    scan = liouville_scan(sp, x, x + d, n=12)
    assert np.all(scan.ratios <= scan.containment * (1 + 1e-12) + 1e-15)


# -- dilatations --------------------------------------------------------------------

def test_dilatation_examples(lebesgue):
    radii = np.geomspace(1e-1, 1e-5, 15)
    lip, Lip, _ = pointwise_dilatation(lebesgue, fn.affine(1.0, 0.0), 0.3, radii)
    assert lip == pytest.approx(1.0, abs=1e-6) and Lip == pytest.approx(1.0, abs=1e-6)
    lip, Lip, _ = pointwise_dilatation(lebesgue, fn.square(), 1.0, radii)
    assert lip == pytest.approx(2.0, abs=1e-3) and Lip == pytest.approx(2.0, abs=1e-3)
    lip, Lip, _ = pointwise_dilatation(lebesgue, fn.constant(1.0), 0.0, radii)
    assert lip == 0.0 and Lip == 0.0


@given(st.sampled_from([fn.square(), fn.reciprocal(), fn.logistic_inv(), fn.exp_scaled(1, 2)]),
       st.floats(-2, 2), st.floats(1e-4, 0.5))
def test_lip_below_Lip(f, x, r0):
    sp = line("lebesgue")
    lip, Lip, _ = pointwise_dilatation(sp, f, x, np.geomspace(r0, r0 * 1e-3, 9), samples=41)
    assert lip <= Lip


# -- principles ---------------------------------------------------------------------

def test_strong_maximum_probe(exp_neg_x):
    rep = principle_checks(exp_neg_x, [fn.one_plus_exp2x()], (0.0, 1.0))
    probe = rep.strong_max["1+exp(2x)"]
    assert probe["ok"] and probe["max_at"] == [1.0]
    assert rep.passed


def test_comparison_of_dp_solutions():
    sp = discretize(line("lebesgue"), 0.0, 1.0, 0.05)
    omega = list(range(1, 20))
    sols = []
    for g in ({0: 0.0, 20: 1.0}, {0: 0.5, 20: 1.5}):
        u, _ = dp_solve_measurable(DirichletProblem.measurable(sp, omega, 0.2, g, tol=1e-12))
        sols.append(fn.FieldFunction(values=np.nan_to_num(u.values), name=f"u{len(sols)}"))
    rep = principle_checks(sp, sols, omega)
    assert rep.comparison and all(c["ok"] for c in rep.comparison)


def test_dimension_probe_on_half_line():
    sp = line("abs_x", (0.0, math.inf))
    basis = [fn.constant(1.0), fn.reciprocal(), fn.affine(1.0, 0.0)]
    probe = dimension_probe(sp, basis, [0.5, 1.0, 2.0, 4.0], omega=(0.0, math.inf))
    assert probe["kernel_dimension"] == 2
    assert probe["max_defects"]["1/x"] < 1e-8
    assert probe["max_defects"]["1x+0"] > 1e-2
