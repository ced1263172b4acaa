import math

import numpy as np
import pytest

from embadapt.errors import (
    LabelOutOfRange,
    LengthMismatch,
    NearZeroNorm,
    NonFiniteInput,
    NonPositiveTemperature,
)
from embadapt.kernels import (
    LOG_EPS,
    cross_entropy,
    finite_diff_grad,
    kl_div,
    l2_normalize,
    softmax,
)


def rng(seed=0):
    return np.random.Generator(np.random.Philox(key=seed))


class TestL2Normalize:
    def test_pythagorean(self):
        np.testing.assert_allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8], atol=1e-15)

    def test_idempotent_on_unit_vector(self):
        u = l2_normalize(rng(1).standard_normal(16))
        np.testing.assert_allclose(l2_normalize(u), u, atol=1e-12)
        assert abs(np.linalg.norm(l2_normalize(u)) - 1.0) < 1e-12

    def test_zero_vector_rejected(self):
        with pytest.raises(NearZeroNorm):
            l2_normalize([0.0, 0.0])

    def test_nan_rejected(self):
        with pytest.raises(NonFiniteInput):
            l2_normalize([1.0, float("nan")])


class TestSoftmax:
    def test_symmetry(self):
        np.testing.assert_allclose(softmax([0.0, 0.0], 1.0), [0.5, 0.5], atol=1e-15)

    def test_two_logits_scalar_formula(self):
        # independent scalar evaluation e/(e+1)
        expected = math.e / (math.e + 1.0)
        out = softmax([1.0, 0.0], 1.0)
        np.testing.assert_allclose(out, [expected, 1.0 - expected], atol=1e-12)
        assert abs(out[0] - 0.73106) < 1e-5

    def test_argmax_invariant_under_temperature(self):
        g = rng(2)
        for _ in range(200):
            z = g.standard_normal(8) * 10
            base = int(np.argmax(softmax(z, 1.0)))
            for tau in (1e-3, 0.5, 2.0, 100.0, 1e6):
                assert int(np.argmax(softmax(z, tau))) == base

    def test_valid_distribution_extreme_inputs(self):
        for z in ([1e8, -1e8], [0.0] * 4, [-745.0, 745.0]):
            for tau in (1e-6, 1.0, 1e6):
                p = softmax(z, tau)
                assert np.all(p >= 0)
                assert abs(p.sum() - 1.0) < 1e-9

    def test_nonpositive_temperature(self):
        with pytest.raises(NonPositiveTemperature):
            softmax([1.0, 2.0], 0.0)
        with pytest.raises(NonPositiveTemperature):
            softmax([1.0, 2.0], -1.0)


class TestKlDiv:
    def test_identity(self):
        p = softmax(rng(3).standard_normal(10), 1.0)
        assert 0.0 <= kl_div(p, p) <= 1e-12

    def test_hand_evaluation(self):
        # 0.5*ln(0.5/0.25) + 0.5*ln(0.5/0.75)
        expected = 0.5 * math.log(2.0) + 0.5 * math.log(2.0 / 3.0)
        assert abs(kl_div([0.5, 0.5], [0.25, 0.75]) - expected) < 1e-12
        assert abs(expected - 0.14384) < 1e-5

    def test_clamp_rule_on_zero_q(self):
        expected = 0.5 * math.log(0.5 / 1.0) + 0.5 * math.log(0.5 / LOG_EPS)
        assert abs(kl_div([0.5, 0.5], [1.0, 0.0]) - expected) < 1e-9

    def test_nonnegative_random(self):
        g = rng(4)
        for _ in range(500):
            p = softmax(g.standard_normal(6) * 3, 1.0)
            q = softmax(g.standard_normal(6) * 3, 1.0)
            assert kl_div(p, q) >= -1e-12

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            kl_div([0.5, 0.5], [1.0])


class TestCrossEntropy:
    def test_certain_prediction(self):
        assert cross_entropy([1.0, 0.0], 0) == 0.0

    def test_uniform(self):
        assert abs(cross_entropy([0.5, 0.5], 1) - math.log(2.0)) < 1e-12

    def test_scalar_evaluation(self):
        assert abs(cross_entropy([0.2, 0.8], 0) - (-math.log(0.2))) < 1e-12

    def test_label_out_of_range(self):
        with pytest.raises(LabelOutOfRange):
            cross_entropy([0.5, 0.5], 2)
        with pytest.raises(LabelOutOfRange):
            cross_entropy([0.5, 0.5], -1)


class TestFiniteDiffGrad:
    def test_quadratic(self):
        grad = finite_diff_grad(lambda t: float(t @ t), np.array([1.0, 2.0]))
        np.testing.assert_allclose(grad, [2.0, 4.0], atol=1e-8)

    def test_constant(self):
        grad = finite_diff_grad(lambda t: 3.5, np.array([1.0, -2.0, 0.3]))
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_softmax_kl_composite(self):
        g = rng(5)
        q = softmax(g.standard_normal(5), 1.0)
        z = g.standard_normal(5)

        def f(logits):
            return kl_div(q, softmax(logits, 1.0))

        fd = finite_diff_grad(f, z)
        analytic = softmax(z, 1.0) - q
        np.testing.assert_allclose(fd, analytic, rtol=1e-5, atol=1e-8)


def test_kernels_deterministic_bitwise():
    g = rng(6)
    z = g.standard_normal(12)
    p = softmax(z, 0.7)
    assert np.array_equal(softmax(z, 0.7), p)
    assert kl_div(p, p[::-1].copy()) == kl_div(p, p[::-1].copy())
    assert np.array_equal(l2_normalize(z), l2_normalize(z))
