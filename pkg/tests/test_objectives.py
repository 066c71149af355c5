import math

import numpy as np
import pytest

from sgatrain.errors import ShapeError
from sgatrain.network import forward
from sgatrain.objectives import (
    ObjectiveSpec,
    composite_values,
    cross_entropy,
    input_gradient_of_loss,
    kl_divergence,
    kl_values,
    loss_and_param_grads,
    sga_objective,
    softmax,
)

from conftest import (
    assert_grads_close,
    fd_input_grad,
    fd_param_grads,
    random_fd_instance,
)


class TestSoftmax:
    def test_symmetric(self):
        np.testing.assert_allclose(softmax([0.0, 0.0]), [0.5, 0.5])

    def test_constant_logits_uniform(self):
        for c in (-3.0, 0.0, 17.5):
            np.testing.assert_allclose(softmax([c, c, c]), np.full(3, 1 / 3))

    def test_large_logits_no_overflow(self):
        p = softmax([1000.0, 0.0])
        assert p[0] == pytest.approx(1.0)
        assert p[1] < 1e-300
        assert np.all(np.isfinite(p))

    def test_sums_to_one(self, rng):
        for _ in range(100):
            p = softmax(rng.standard_normal(int(rng.integers(2, 10))))
            assert abs(p.sum() - 1.0) <= 1e-12


class TestCrossEntropy:
    def test_uniform_case(self):
        assert cross_entropy([0.0, 0.0], 0) == pytest.approx(math.log(2), abs=1e-12)

    def test_confident_correct_small_loss(self):
        # direct log-sum-exp evaluation: ln(1 + e^-20)
        expected = math.log1p(math.exp(-20.0))
        assert cross_entropy([10.0, -10.0], 0) == pytest.approx(expected, rel=1e-9)
        assert cross_entropy([10.0, -10.0], 0) >= 0.0

    def test_shift_invariance(self, rng):
        logits = rng.standard_normal(4)
        base = cross_entropy(logits, 2)
        for c in (-100.0, 3.7, 250.0):
            assert cross_entropy(logits + c, 2) == pytest.approx(base, abs=1e-9)

    def test_invalid_label(self):
        with pytest.raises(ValueError):
            cross_entropy([0.0, 0.0], 2)

    def test_nonnegative(self, rng):
        for _ in range(200):
            logits = rng.standard_normal(3) * 10
            assert cross_entropy(logits, int(rng.integers(0, 3))) >= 0.0


class TestKL:
    def test_identical_distributions(self):
        assert kl_divergence([0.3, 0.7], [0.3, 0.7]) == 0.0

    def test_hand_value(self):
        # sum p ln(p/q) = 0.5 ln 2 + 0.5 ln(2/3) = 0.5 ln(4/3)
        expected = 0.5 * math.log(0.5 / 0.25) + 0.5 * math.log(0.5 / 0.75)
        got = kl_divergence([0.5, 0.5], [0.25, 0.75])
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(0.143841, abs=1e-6)

    def test_nonnegative_over_random_pairs(self, rng):
        for _ in range(10_000):
            k = int(rng.integers(2, 6))
            p = rng.uniform(0.01, 1.0, k)
            q = rng.uniform(0.01, 1.0, k)
            assert kl_divergence(p / p.sum(), q / q.sum()) >= 0.0

    def test_zero_p_entries_contribute_nothing(self):
        assert kl_divergence([0.0, 1.0], [0.5, 0.5]) == pytest.approx(
            math.log(2), abs=1e-12
        )

    def test_rejects_non_distribution(self):
        with pytest.raises(ValueError):
            kl_divergence([0.9, 0.9], [0.5, 0.5])

    def test_zero_iff_equal(self, rng):
        for _ in range(100):
            p = rng.uniform(0.05, 1.0, 3)
            p /= p.sum()
            q = rng.uniform(0.05, 1.0, 3)
            q /= q.sum()
            kl = kl_divergence(p, q)
            if np.allclose(p, q, atol=1e-9):
                assert kl < 1e-15
            else:
                assert kl > 0.0


class TestCompositeObjective:
    def test_lambda_zero_equals_ce(self, rng):
        params, x, labels, x_adv = random_fd_instance(rng, needs_adv=True)
        label = int(labels[0])
        composite = sga_objective(params, x, label, x_adv, 0.0)
        assert composite == cross_entropy(forward(params, x)[0], label)

    def test_identical_inputs_kl_vanishes(self, rng):
        params, x, labels, _ = random_fd_instance(rng)
        label = int(labels[0])
        composite = sga_objective(params, x, label, x, 1.5)
        assert composite == pytest.approx(
            cross_entropy(forward(params, x)[0], label), abs=1e-15
        )

    def test_monotone_in_kl_weight(self, rng):
        params, x, labels, x_adv = random_fd_instance(rng, needs_adv=True)
        label = int(labels[0])
        values = [sga_objective(params, x, label, x_adv, lam) for lam in (0, 0.5, 1, 2)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_shape_mismatch_rejected(self, rng):
        params, x, labels, _ = random_fd_instance(rng)
        with pytest.raises(ShapeError):
            sga_objective(params, x, int(labels[0]), np.zeros((1, x.shape[1] + 1)), 1.0)

    def test_param_grads_match_finite_differences(self, rng):
        for _ in range(4):
            params, x, labels, x_adv = random_fd_instance(
                rng, max_inputs=10, batch=2, needs_adv=True
            )
            spec = ObjectiveSpec("ce_plus_kl", 1.3)
            bundle = loss_and_param_grads(params, x, labels, spec, x_adv=x_adv)

            def loss(p):
                return float(
                    composite_values(
                        forward(p, x), forward(p, x_adv), labels, 1.3
                    ).mean()
                )

            assert loss(params) == pytest.approx(bundle.loss_value, rel=1e-12)
            assert_grads_close(bundle.param_grads, fd_param_grads(loss, params))

    def test_kl_only_grads_match_finite_differences(self, rng):
        # isolates the KL gradient path through both forward passes
        for _ in range(3):
            params, x, labels, x_adv = random_fd_instance(
                rng, max_inputs=8, needs_adv=True
            )

            def kl_loss(p):
                return float(kl_values(forward(p, x), forward(p, x_adv))[0])

            ce = loss_and_param_grads(params, x, labels, ObjectiveSpec("ce_only"))
            both = loss_and_param_grads(
                params, x, labels, ObjectiveSpec("ce_plus_kl", 1.0), x_adv=x_adv
            )
            kl_analytic = [
                (bw - aw, bb - ab)
                for (aw, ab), (bw, bb) in zip(ce.param_grads, both.param_grads)
            ]
            assert_grads_close(kl_analytic, fd_param_grads(kl_loss, params))

    def test_requires_x_adv(self, rng):
        params, x, labels, _ = random_fd_instance(rng)
        with pytest.raises(ValueError, match="x_adv"):
            loss_and_param_grads(params, x, labels, ObjectiveSpec("ce_plus_kl", 1.0))


class TestLossInputGradient:
    def test_matches_finite_differences(self, rng):
        from sgatrain.objectives import ce_values

        for _ in range(5):
            params, x, labels, _ = random_fd_instance(rng, max_inputs=16)
            label = int(labels[0])
            analytic = input_gradient_of_loss(params, x, label)
            fd = fd_input_grad(
                lambda xv: float(ce_values(forward(params, xv), [label])[0]), x
            )
            np.testing.assert_allclose(analytic, fd, rtol=1e-6, atol=1e-8)

    def test_saturated_prediction_vanishing_gradient(self):
        # confidently-correct linear model: d(CE)/dx scales with (p_y - 1) -> 0
        from sgatrain.network import NetworkParams, NetworkSpec

        w = np.array([[30.0, 0.0], [-30.0, 0.0]])
        params = NetworkParams([(w, np.zeros(2))], NetworkSpec(2, (), 2))
        grad = input_gradient_of_loss(params, [[1.0, 0.3]], 0)
        assert np.abs(grad).max() < 1e-20

    def test_gradient_linear_in_weight(self, rng):
        # doubling the KL weight doubles the KL share of the gradient
        params, x, labels, x_adv = random_fd_instance(rng, needs_adv=True)
        ce = loss_and_param_grads(params, x, labels, ObjectiveSpec("ce_only"))
        one = loss_and_param_grads(
            params, x, labels, ObjectiveSpec("ce_plus_kl", 1.0), x_adv=x_adv
        )
        two = loss_and_param_grads(
            params, x, labels, ObjectiveSpec("ce_plus_kl", 2.0), x_adv=x_adv
        )
        for (cw, cb), (ow, ob), (tw, tb) in zip(
            ce.param_grads, one.param_grads, two.param_grads
        ):
            np.testing.assert_allclose(tw - cw, 2 * (ow - cw), rtol=1e-12, atol=1e-15)
            np.testing.assert_allclose(tb - cb, 2 * (ob - cb), rtol=1e-12, atol=1e-15)
