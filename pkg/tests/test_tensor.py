import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reqtag.tensor import (DegenerateMaskError, ShapeError, elementwise,
                           grad_check, logsumexp, matmul, softmax_rows, tensor)


class TestMatmul:
    def test_identity(self):
        m = tensor([[1.5, -2.0], [0.25, 7.0]])
        np.testing.assert_array_equal(matmul(np.eye(2), m), m)

    def test_hand_product(self):
        a = tensor([[1, 2], [3, 4]])
        b = tensor([[5], [6]])
        np.testing.assert_array_equal(matmul(a, b), [[17], [39]])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError, match=r"\(3, 4\).*\(5, 2\)"):
            matmul(np.zeros((3, 4)), np.zeros((5, 2)))

    def test_associativity(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a = rng.normal(size=(3, 4))
            b = rng.normal(size=(4, 5))
            c = rng.normal(size=(5, 2))
            np.testing.assert_allclose(matmul(matmul(a, b), c),
                                       matmul(a, matmul(b, c)), atol=1e-9)


class TestSoftmaxRows:
    def test_uniform(self):
        out = softmax_rows(np.zeros((1, 3)))
        np.testing.assert_allclose(out, [[1 / 3] * 3], atol=1e-15)

    def test_stability(self):
        out = softmax_rows(np.array([[1000.0, 0.0]]))
        assert np.all(np.isfinite(out))
        assert out[0, 0] == pytest.approx(1.0)
        assert out[0, 1] == pytest.approx(0.0, abs=1e-12)

    def test_masked_matches_direct_softmax(self):
        a, b, c = 0.3, -1.2, 5.0
        masked = softmax_rows(np.array([[a, b, c]]),
                              mask=np.array([[True, True, False]]))
        direct = softmax_rows(np.array([[a, b]]))
        np.testing.assert_allclose(masked[0, :2], direct[0], atol=1e-12)
        assert masked[0, 2] == 0.0

    def test_fully_masked_row(self):
        with pytest.raises(DegenerateMaskError):
            softmax_rows(np.zeros((1, 2)), mask=np.array([[False, False]]))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=6),
           st.floats(-30, 30))
    def test_rows_sum_to_one_and_shift_invariant(self, row, shift):
        x = np.array([row])
        out = softmax_rows(x)
        assert out.sum() == pytest.approx(1.0, abs=1e-9)
        shifted = softmax_rows(x + shift)
        np.testing.assert_allclose(out, shifted, atol=1e-9)


class TestElementwise:
    def test_sigmoid_zero(self):
        assert elementwise(np.zeros((1, 1)), "sigmoid")[0, 0] == 0.5

    def test_tanh_zero(self):
        assert elementwise(np.zeros((1, 1)), "tanh")[0, 0] == 0.0

    def test_sigmoid_derivative_identity(self):
        x = np.array([[1.3]])
        s = elementwise(x, "sigmoid")
        d = elementwise(x, "sigmoid_deriv")
        assert d[0, 0] == pytest.approx(s[0, 0] * (1 - s[0, 0]), abs=1e-12)

    def test_ranges(self):
        x = np.linspace(-10, 10, 41).reshape(1, -1)
        s = elementwise(x, "sigmoid")
        t = elementwise(x, "tanh")
        assert np.all((s > 0) & (s < 1))
        assert np.all((t > -1) & (t < 1))

    def test_unknown_fn(self):
        with pytest.raises(ValueError):
            elementwise(np.zeros((1, 1)), "relu")


class TestGradCheck:
    def test_correct_gradient_passes(self):
        theta = np.array([[1.0, -2.0], [0.5, 3.0]])
        res = grad_check(lambda t: float(np.sum(t ** 2)), theta, 2 * theta,
                         h=1e-4, tol=1e-6)
        assert res.passed

    def test_wrong_gradient_fails_with_worst_index(self):
        theta = np.array([[1.0, -2.0], [0.5, 3.0]])
        res = grad_check(lambda t: float(np.sum(t ** 2)), theta, 3 * theta,
                         h=1e-4, tol=1e-6)
        assert not res.passed
        # relative error of 3x vs 2x is 1/3 at every coordinate; worst is
        # whichever came first in scan order
        assert res.max_relative_error == pytest.approx(1 / 3, rel=1e-3)

    def test_param_restored(self):
        theta = np.array([[1.0, 2.0]])
        before = theta.copy()
        grad_check(lambda t: float(np.sum(t)), theta, np.ones_like(theta))
        np.testing.assert_array_equal(theta, before)

    def test_bad_h(self):
        with pytest.raises(ValueError):
            grad_check(lambda t: 0.0, np.zeros((1, 1)), np.zeros((1, 1)), h=0.0)


def test_logsumexp_matches_naive():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(4, 5))
    np.testing.assert_allclose(logsumexp(x, axis=1),
                               np.log(np.exp(x).sum(axis=1)), atol=1e-12)
