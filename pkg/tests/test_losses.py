"""Tests for the classification, distillation and VICReg objectives."""

import math

import numpy as np
import pytest

from vickd.augment import ViewBatch
from vickd.errors import ConfigError, DataError, ShapeError
from vickd.losses import (
    accuracy,
    ard_loss,
    cross_entropy,
    kd_loss,
    kl_div,
    rslad_loss,
    trades_loss,
    vic_kd_loss,
    vic_kd_terms,
    vicreg_covariance,
    vicreg_invariance,
    vicreg_loss,
    vicreg_variance,
)
from vickd.tensor import Tensor, as_tensor, backward, gradcheck
from vickd.types import RecipeConfig, VicregWeights


def _np_log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _np_ce(logits, y):
    return float(-_np_log_softmax(logits)[np.arange(len(y)), y].mean())


def _np_kl(p, q, t=1.0):
    log_p, log_q = _np_log_softmax(p / t), _np_log_softmax(q / t)
    return float((np.exp(log_p) * (log_p - log_q)).sum(axis=1).mean())


def _linear(w):
    w = Tensor(w)
    return lambda x: as_tensor(x) @ w


class TestClassification:
    def test_uniform_logits_give_log_classes(self):
        loss = cross_entropy(Tensor(np.zeros((3, 5))), np.array([0, 1, 4]))
        assert loss.item() == pytest.approx(math.log(5), rel=1e-6)

    def test_per_sample(self):
        loss = cross_entropy(Tensor(np.zeros((3, 5))), np.array([0, 1, 4]), reduction="none")
        assert loss.shape == (3,)

    def test_label_out_of_range(self):
        with pytest.raises(DataError):
            cross_entropy(Tensor(np.zeros((2, 3))), np.array([0, 3]))

    def test_label_shape(self):
        with pytest.raises(ShapeError):
            cross_entropy(Tensor(np.zeros((2, 3))), np.array([0, 1, 2]))

    def test_kl_identical_is_zero(self, rng):
        p = rng.normal(size=(4, 6))
        assert kl_div(p, Tensor(p)).item() == pytest.approx(0.0, abs=1e-6)

    def test_kl_non_negative_and_asymmetric(self, rng):
        p, q = rng.normal(size=(4, 6)), rng.normal(size=(4, 6)) * 3
        pq, qp = kl_div(p, q).item(), kl_div(q, p).item()
        assert pq > 0 and qp > 0
        assert pq != pytest.approx(qp)

    def test_kl_temperature_flattens(self, rng):
        p, q = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
        assert kl_div(p, q, temperature=10.0).item() < kl_div(p, q).item()

    def test_two_class_hand_case(self):
        loss = cross_entropy(Tensor([[2.0, 0.0]]), np.array([0]))
        assert loss.item() == pytest.approx(math.log1p(math.exp(-2.0)), rel=1e-5)

    def test_kl_one_hot_against_uniform(self):
        assert kl_div(np.array([[50.0, -50.0]]), np.zeros((1, 2))).item() == pytest.approx(math.log(2), rel=1e-5)

    def test_kl_first_argument_is_reference(self):
        p, q = np.array([[3.0, 0.0, 0.0]]), np.zeros((1, 3))
        out = kl_div(p, q).item()
        assert out == pytest.approx(_np_kl(p, q), rel=1e-5)
        assert out != pytest.approx(_np_kl(q, p), rel=1e-2)

    def test_kl_shape_mismatch(self):
        with pytest.raises(ShapeError):
            kl_div(np.zeros((2, 3)), np.zeros((2, 4)))

    def test_accuracy_percent(self):
        assert accuracy(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([0, 0])) == 50.0
        assert accuracy(np.zeros((0, 2)), np.array([])) == 0.0


class TestDistillLosses:
    def test_kd_weight_zero_is_cross_entropy(self, rng):
        s, t = Tensor(rng.normal(size=(4, 3))), rng.normal(size=(4, 3))
        y = np.array([0, 1, 2, 0])
        cfg = RecipeConfig(kd_weight=0.0)
        assert kd_loss(s, t, y, cfg).item() == pytest.approx(cross_entropy(s, y).item(), rel=1e-6)

    def test_kd_matching_teacher_has_no_soft_term(self, rng):
        logits = rng.normal(size=(4, 3))
        cfg = RecipeConfig(kd_weight=1.0)
        assert kd_loss(Tensor(logits), logits, np.zeros(4, dtype=int), cfg).item() == pytest.approx(0.0, abs=1e-5)

    def test_kd_does_not_backprop_into_teacher(self, rng):
        s = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        t = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        backward(kd_loss(s, t, np.zeros(4, dtype=int), RecipeConfig()))
        assert s.grad is not None and t.grad is None

    def test_kd_matches_direct_formula(self, rng):
        s, t = rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
        y = rng.integers(0, 4, size=5)
        cfg = RecipeConfig(kd_weight=0.3, kd_temperature=2.5)
        expected = 0.7 * _np_ce(s, y) + 0.3 * 2.5 ** 2 * _np_kl(t, s, 2.5)
        assert kd_loss(Tensor(s), t, y, cfg).item() == pytest.approx(expected, rel=1e-4)

    def test_ard_matches_direct_formula(self, rng):
        ws, wt = rng.normal(size=(6, 3)), rng.normal(size=(6, 3))
        x, x_adv = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
        y = rng.integers(0, 3, size=4)
        cfg = RecipeConfig(kd_weight=0.5, ard_temperature=2.0)
        loss = ard_loss(_linear(ws), _linear(wt), x, x_adv, y, cfg)
        adv, target = x_adv @ ws, x @ wt
        expected = 0.5 * _np_ce(adv, y) + 0.5 * 4.0 * _np_kl(target, adv, 2.0)
        assert loss.item() == pytest.approx(expected, rel=1e-4)

    def test_rslad_matches_direct_formula(self, rng):
        ws, wt = rng.normal(size=(6, 3)), rng.normal(size=(6, 3))
        x, x_adv = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
        cfg = RecipeConfig(rslad_weight=0.8)
        loss = rslad_loss(_linear(ws), _linear(wt), x, x_adv, cfg)
        target = x @ wt
        expected = 0.2 * _np_kl(target, x @ ws) + 0.8 * _np_kl(target, x_adv @ ws)
        assert loss.item() == pytest.approx(expected, rel=1e-4)

    def test_rslad_weight_zero_is_clean_term(self, rng):
        ws, wt = rng.normal(size=(6, 3)), rng.normal(size=(6, 3))
        x, x_adv = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
        loss = rslad_loss(_linear(ws), _linear(wt), x, x_adv, RecipeConfig(rslad_weight=0.0))
        assert loss.item() == pytest.approx(_np_kl(x @ wt, x @ ws), rel=1e-4)

    def test_trades_beta_zero_is_clean_cross_entropy(self, rng):
        w = rng.normal(size=(6, 3))
        x, x_adv = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
        y = np.array([0, 1, 2, 0])
        loss = trades_loss(_linear(w), x, x_adv, y, beta=0.0)
        assert loss.item() == pytest.approx(_np_ce(x @ w, y), rel=1e-4)

    def test_ard_weight_zero_is_adversarial_ce(self, tiny_student, tiny_teacher, rng):
        x = rng.normal(scale=0.1, size=(4, 400)).astype(np.float32)
        x_adv = x + 0.01
        y = np.array([0, 1, 2, 3])
        loss = ard_loss(tiny_student.logits, tiny_teacher.logits, x, x_adv, y, RecipeConfig(kd_weight=0.0))
        expected = cross_entropy(tiny_student.logits(x_adv), y).item()
        assert loss.item() == pytest.approx(expected, rel=1e-5)

    def test_rslad_self_distillation_is_zero(self, tiny_student, rng):
        x = rng.normal(scale=0.1, size=(4, 400)).astype(np.float32)
        loss = rslad_loss(tiny_student.logits, tiny_student.logits, x, x, RecipeConfig())
        assert loss.item() == pytest.approx(0.0, abs=1e-5)

    def test_rslad_teacher_stays_frozen(self, tiny_student, tiny_teacher, rng):
        x = rng.normal(scale=0.1, size=(4, 400)).astype(np.float32)
        backward(rslad_loss(tiny_student.logits, tiny_teacher.logits, x, x + 0.01, RecipeConfig()))
        assert all(p.grad is None for p in tiny_teacher.parameters())
        assert any(p.grad is not None for p in tiny_student.parameters())

    def test_trades_on_clean_input_is_cross_entropy(self, tiny_student, rng):
        x = rng.normal(scale=0.1, size=(4, 400)).astype(np.float32)
        y = np.array([0, 1, 2, 3])
        loss = trades_loss(tiny_student.logits, x, x, y, beta=6.0)
        assert loss.item() == pytest.approx(cross_entropy(tiny_student.logits(x), y).item(), abs=1e-5)


class TestVicreg:
    def test_variance_zero_when_spread(self):
        zp = Tensor([[2.0, -2.0], [-2.0, 2.0], [0.0, 0.0]])
        assert vicreg_variance(zp).item() == 0.0

    def test_variance_of_collapsed_batch(self):
        zp = Tensor(np.ones((4, 3)))
        assert vicreg_variance(zp, gamma=1.0, eps=1e-4).item() == pytest.approx(0.99, rel=1e-5)

    def test_invariance(self):
        assert vicreg_invariance(np.zeros((2, 3)), Tensor(np.ones((2, 3)))).item() == pytest.approx(3.0)

    def test_variance_unchanged_by_duplicating_columns(self, rng):
        zp = rng.normal(scale=0.5, size=(8, 3))
        once = vicreg_variance(Tensor(zp)).item()
        twice = vicreg_variance(Tensor(np.hstack([zp, zp]))).item()
        assert twice == pytest.approx(once, rel=1e-5)

    def test_invariance_single_row(self):
        assert vicreg_invariance(np.array([[1.0, 0.0]]), Tensor([[0.0, 1.0]])).item() == pytest.approx(2.0)

    def test_covariance_hand_case(self):
        zp = Tensor([[1.0, 1.0], [-1.0, -1.0]])
        assert vicreg_covariance(zp).item() == pytest.approx(4.0)

    def test_covariance_ignores_diagonal(self):
        zp = Tensor([[1.0, 0.0], [-1.0, 0.0]])
        assert vicreg_covariance(zp).item() == 0.0

    def test_needs_two_rows(self):
        with pytest.raises(ShapeError, match="n >= 2"):
            vicreg_variance(Tensor(np.ones((1, 3))))
        with pytest.raises(ShapeError):
            vicreg_covariance(Tensor(np.ones((1, 3))))

    def test_invariance_shape_mismatch(self):
        with pytest.raises(ShapeError):
            vicreg_invariance(np.zeros((2, 3)), Tensor(np.zeros((2, 4))))

    def test_weighted_sum(self, rng):
        z, zp = rng.normal(size=(5, 4)), Tensor(rng.normal(scale=0.3, size=(5, 4)))
        w = VicregWeights(lambda_var=2.0, lambda_inv=0.5, lambda_cov=0.0)
        expected = 2.0 * vicreg_variance(zp).item() + 0.5 * vicreg_invariance(z, zp).item()
        assert vicreg_loss(z, zp, w).item() == pytest.approx(expected, rel=1e-5)

    def test_gradients_match_finite_differences(self, rng):
        z = rng.normal(size=(6, 4))
        zp = rng.normal(scale=0.3, size=(6, 4))
        assert gradcheck(lambda a, b: vicreg_loss(a, b), [z, zp]) < 1e-4


@pytest.fixture
def vic_inputs(rng):
    x = rng.normal(scale=0.1, size=(4, 400)).astype(np.float32)
    views = ViewBatch(view_t=x, view_t_prime=x * 0.9)
    return views, views.view_t_prime + 0.001, np.array([0, 1, 2, 3])


class TestVicKd:
    def test_alpha_interpolates(self, tiny_student, tiny_teacher, vic_inputs):
        views, x_adv, y = vic_inputs
        terms = vic_kd_terms(tiny_student, tiny_teacher, views, x_adv, y, RecipeConfig())
        trades, vic = terms.trades.item(), terms.vicreg().item()
        assert terms.combine(1.0).item() == pytest.approx(trades, rel=1e-6)
        assert terms.combine(0.0).item() == pytest.approx(vic, rel=1e-6)
        assert terms.combine(0.25).item() == pytest.approx(0.25 * trades + 0.75 * vic, rel=1e-5)

    def test_loss_matches_terms(self, tiny_student, tiny_teacher, vic_inputs):
        views, x_adv, y = vic_inputs
        cfg = RecipeConfig(alpha=0.3)
        terms = vic_kd_terms(tiny_student, tiny_teacher, views, x_adv, y, cfg)
        loss = vic_kd_loss(tiny_student, tiny_teacher, views, x_adv, y, cfg)
        assert loss.item() == pytest.approx(terms.combine(0.3).item(), rel=1e-6)

    def test_as_floats_keys(self, tiny_student, tiny_teacher, vic_inputs):
        views, x_adv, y = vic_inputs
        terms = vic_kd_terms(tiny_student, tiny_teacher, views, x_adv, y, RecipeConfig())
        assert set(terms.as_floats()) == {"trades", "var", "inv", "cov"}

    def test_alpha_out_of_range(self, tiny_student, tiny_teacher, vic_inputs):
        views, x_adv, y = vic_inputs
        terms = vic_kd_terms(tiny_student, tiny_teacher, views, x_adv, y, RecipeConfig())
        with pytest.raises(ConfigError):
            terms.combine(1.5)

    def test_teacher_frozen_student_trained(self, tiny_student, tiny_teacher, vic_inputs):
        views, x_adv, y = vic_inputs
        backward(vic_kd_loss(tiny_student, tiny_teacher, views, x_adv, y, RecipeConfig()))
        assert all(p.grad is None for p in tiny_teacher.parameters())
        projection = [p for n, p in tiny_student.named_parameters() if n.startswith("projection.")]
        assert projection and all(p.grad is not None for p in projection)

    def test_alpha_one_leaves_projection_untouched(self, tiny_student, tiny_teacher, vic_inputs):
        views, x_adv, y = vic_inputs
        backward(vic_kd_loss(tiny_student, tiny_teacher, views, x_adv, y, RecipeConfig(alpha=1.0)))
        for name, p in tiny_student.named_parameters():
            if name.startswith("projection."):
                assert p.grad is None or not p.grad.any()
