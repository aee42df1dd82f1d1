import math

import numpy as np
import pytest

from harmonic_mvp import functions as fn
from harmonic_mvp.errors import InputError
from harmonic_mvp.quadrature import adaptive_simpson, integrate_pieces


def test_simpson_polynomial_is_exact():
    assert adaptive_simpson(lambda t: t ** 3 - t, -1.0, 2.0, 1e-12) == pytest.approx(2.25, abs=1e-13)


def test_simpson_against_closed_form():
    got = adaptive_simpson(np.exp, 0.0, 3.0, 1e-10)
    assert got == pytest.approx(math.expm1(3.0), abs=1e-9)


def test_pieces_handle_a_kink():
    got = integrate_pieces(np.abs, -1.0, 2.0, (0.0,), 1e-12)
    assert got == pytest.approx(2.5, abs=1e-12)


def test_non_finite_integrand_raises():
    with pytest.raises(FloatingPointError):
        adaptive_simpson(lambda t: np.full_like(t, np.inf), 0.0, 1.0, 1e-10)


def test_catalog_values():
    x = np.array([-1.0, 0.0, 2.0])
    np.testing.assert_allclose(fn.affine(2.0, 1.0)(x), [-1.0, 1.0, 5.0])
    np.testing.assert_allclose(fn.reciprocal()(x), [-1.0, 0.0, 0.5])
    np.testing.assert_allclose(fn.a_over_x_plus_b(2.0, 3.0)(x), [1.0, 3.0, 4.0])
    np.testing.assert_allclose(fn.logistic_inv()(x), 1 / (1 + np.exp(2 * x)))
    np.testing.assert_allclose(fn.one_plus_exp2x()(x), 1 + np.exp(2 * x))


def test_logistic_inv_does_not_overflow():
    assert fn.logistic_inv()(800.0) == 0.0
    assert fn.logistic_inv()(-800.0) == 1.0


def test_algebra_and_max():
    f = fn.square() - 1.0
    g = 2.0 * fn.affine(1.0, 0.0)
    np.testing.assert_allclose((f + g)(np.array([1.0, 2.0])), [2.0, 7.0])
    np.testing.assert_allclose(fn.maximum(f, g)(np.array([-3.0, 1.0])), [8.0, 2.0])
    np.testing.assert_allclose(f.positive_part(2.0)(np.array([0.0, 3.0])), [0.0, 6.0])


def test_sampled_function_rejects_inf_and_mixing():
    with pytest.raises(InputError):
        fn.FieldFunction(values=np.array([1.0, np.inf]))
    s = fn.FieldFunction(values=np.array([1.0, 2.0]))
    with pytest.raises(InputError):
        s + fn.constant(1.0)
    with pytest.raises(InputError):
        s(0.5)


def test_from_ref_forms():
    assert fn.from_ref("square")(3.0) == 9.0
    assert fn.from_ref({"id": "affine", "params": {"a": 2, "b": 1}})(1.0) == 3.0
    assert fn.from_ref({"values": [1, 2]})(np.array([1]))[0] == 2.0
    with pytest.raises(InputError):
        fn.from_ref("unknown")
    with pytest.raises(InputError):
        fn.from_ref({"id": "affine", "params": {"c": 1}})
