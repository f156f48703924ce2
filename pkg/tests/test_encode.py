"""Radar encoding and loss tests: folding, normalization, seed, gradients."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.special import expit

from radarlabel.encode import (ELEVATION_BINS, RAE_SHAPE, RAED_SHAPE, LossWeights,
                               RaedTensor, RaeTensor, SemanticVolume, compose_seed,
                               loss, normalize_rae, raed_from_channels, raed_to_rae)
from radarlabel.tensorio import MalformedTensorError


def _raed(power, elev):
    return RaedTensor(power=np.asarray(power, float), elev_index=np.asarray(elev))


def scalar_fold_oracle(power: np.ndarray, elev: np.ndarray) -> np.ndarray:
    """Reference fold: plain accumulation loops with count division."""
    D, A, R = power.shape
    sums = np.zeros((R, A, ELEVATION_BINS))
    counts = np.zeros((R, A, ELEVATION_BINS), dtype=np.int64)
    for d in range(D):
        for a in range(A):
            for r in range(R):
                e = elev[d, a, r] - 1
                sums[r, a, e] += power[d, a, r]
                counts[r, a, e] += 1
    out = np.zeros_like(sums)
    hit = counts > 0
    out[hit] = sums[hit] / counts[hit]
    return out


class TestRaedToRae:
    def test_all_zero_power(self):
        power = np.zeros((2, 3, 4))
        elev = np.ones((2, 3, 4), dtype=np.int64)
        rae = raed_to_rae(_raed(power, elev))
        assert rae.power.shape == (4, 3, ELEVATION_BINS)
        assert not rae.power.any()
        assert not rae.normalized

    def test_single_deposit_lands_at_recorded_elevation(self):
        power = np.zeros((4, 12, 256))
        elev = np.ones((4, 12, 256), dtype=np.int64)
        power[3, 10, 200] = 8.0
        elev[3, 10, 200] = 17
        rae = raed_to_rae(_raed(power, elev))
        assert rae.power[200, 10, 16] == 8.0
        other = rae.power.copy()
        other[200, 10, 16] = 0.0
        assert not other.any()

    def test_colliding_doppler_bins_average(self):
        # two Doppler bins hit the same cell with powers 2 and 6
        power = np.zeros((2, 3, 4))
        elev = np.ones((2, 3, 4), dtype=np.int64)
        power[0, 1, 2] = 2.0
        power[1, 1, 2] = 6.0
        elev[0, 1, 2] = 5
        elev[1, 1, 2] = 5
        rae = raed_to_rae(_raed(power, elev))
        assert rae.power[2, 1, 4] == 4.0

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(51)
        power = rng.uniform(0, 10, size=(5, 6, 7))
        elev = rng.integers(1, ELEVATION_BINS + 1, size=(5, 6, 7))
        rae = raed_to_rae(_raed(power, elev))
        np.testing.assert_allclose(rae.power, scalar_fold_oracle(power, elev), atol=1e-12)

    def test_nonzero_cells_bounded_by_nonzero_voxels(self):
        rng = np.random.default_rng(52)
        power = np.where(rng.uniform(size=(6, 5, 8)) < 0.2, rng.uniform(1, 5, size=(6, 5, 8)), 0.0)
        elev = rng.integers(1, ELEVATION_BINS + 1, size=(6, 5, 8))
        rae = raed_to_rae(_raed(power, elev))
        assert np.count_nonzero(rae.power) <= np.count_nonzero(power)

    def test_elevation_index_out_of_range_rejected(self):
        with pytest.raises(MalformedTensorError, match="elevation index"):
            _raed(np.zeros((1, 1, 1)), np.array([[[0]]]))
        with pytest.raises(MalformedTensorError, match="elevation index"):
            _raed(np.zeros((1, 1, 1)), np.array([[[ELEVATION_BINS + 1]]]))

    def test_negative_power_rejected(self):
        with pytest.raises(MalformedTensorError, match="non-negative"):
            _raed(np.full((1, 1, 1), -0.5), np.ones((1, 1, 1), dtype=np.int64))

    def test_canonical_dims(self):
        raed = _raed(np.zeros(RAED_SHAPE), np.ones(RAED_SHAPE, dtype=np.int8))
        assert raed.is_canonical
        rae = raed_to_rae(raed)
        assert rae.power.shape == RAE_SHAPE
        assert rae.is_canonical

    def test_channel_pair_split(self):
        rng = np.random.default_rng(50)
        pair = np.zeros((2, 3, 4, 5), dtype=np.float32)
        pair[0] = rng.uniform(0, 9, size=(3, 4, 5))
        pair[1] = rng.integers(1, ELEVATION_BINS + 1, size=(3, 4, 5))
        raed = raed_from_channels(pair)
        np.testing.assert_allclose(raed.power, pair[0])
        np.testing.assert_array_equal(raed.elev_index, pair[1].astype(np.int64))
        with pytest.raises(MalformedTensorError, match="channel pair"):
            raed_from_channels(np.zeros((3, 4, 5)))
        bad = pair.copy()
        bad[1, 0, 0, 0] = 1.5
        with pytest.raises(MalformedTensorError, match="non-integral"):
            raed_from_channels(bad)


class TestNormalizeRae:
    def test_all_zero_frame_stays_zero(self):
        out = normalize_rae(RaeTensor(np.zeros((4, 5, 6))))
        assert not out.power.any()
        assert out.normalized

    def test_constant_frame_becomes_zero(self):
        # rounding in mean-of-identicals leaves ~1e-10 after the epsilon guard
        out = normalize_rae(RaeTensor(np.full((4, 5, 6), 3.7)))
        np.testing.assert_allclose(out.power, 0.0, atol=1e-9)

    def test_standardization_against_two_pass_oracle(self):
        rng = np.random.default_rng(53)
        raw = rng.uniform(0, 50, size=(20, 16, 6))
        out = normalize_rae(RaeTensor(raw), epsilon=1e-6).power
        for e in range(6):
            logp = np.log1p(raw[:, :, e])
            mu = logp.sum() / logp.size
            sigma = np.sqrt(((logp - mu) ** 2).sum() / logp.size)
            np.testing.assert_allclose(out[:, :, e], (logp - mu) / (sigma + 1e-6),
                                       atol=1e-12)
            assert abs(out[:, :, e].mean()) < 1e-4
            assert abs(out[:, :, e].std() - 1.0) < 1e-4

    def test_shift_invariance_in_log_space(self):
        # scaling (1+p) by c shifts log1p by log c and leaves the output unchanged
        rng = np.random.default_rng(54)
        raw = rng.uniform(0, 20, size=(10, 8, 4))
        c = 3.5
        base = normalize_rae(RaeTensor(raw)).power
        shifted = normalize_rae(RaeTensor(c * (1.0 + raw) - 1.0)).power
        np.testing.assert_allclose(shifted, base, atol=1e-9)

    def test_double_normalization_rejected(self):
        out = normalize_rae(RaeTensor(np.random.default_rng(55).uniform(0, 1, (3, 3, 3))))
        with pytest.raises(ValueError, match="already normalized"):
            normalize_rae(out)

    def test_negative_power_rejected(self):
        with pytest.raises(MalformedTensorError):
            RaeTensor(np.full((2, 2, 2), -1.0))


class TestComposeSeed:
    def test_symmetric_logits_give_tenth(self):
        occ = np.zeros((1, 3, 4, 5))
        cls = np.zeros((1, 5, 4, 5))
        seed = compose_seed(occ, cls)
        assert seed.kind == "seed"
        assert seed.values.shape == (1, 5, 4, 5, 3)
        np.testing.assert_allclose(seed.values, 0.1, atol=1e-12)

    def test_saturated_logits(self):
        occ = np.full((1, 2, 2, 2), 50.0)
        cls = np.zeros((1, 5, 2, 2))
        cls[0, 3] = 50.0
        seed = compose_seed(occ, cls).values
        np.testing.assert_allclose(seed[0, 3], 1.0, atol=1e-6)
        for k in (0, 1, 2, 4):
            np.testing.assert_allclose(seed[0, k], 0.0, atol=1e-6)

    def test_class_sum_equals_occupancy_gate(self):
        rng = np.random.default_rng(56)
        occ = rng.normal(size=(2, 4, 5, 6))
        cls = rng.normal(size=(2, 5, 5, 6))
        seed = compose_seed(occ, cls).values
        sums = seed.sum(axis=1)                       # (B, R, A, E)
        gate = expit(occ).transpose(0, 2, 3, 1)       # (B, R, A, E)
        np.testing.assert_allclose(sums, gate, atol=1e-6)
        assert seed.min() >= 0.0 and seed.max() <= 1.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            compose_seed(np.zeros((1, 3, 4, 5)), np.zeros((1, 5, 4, 6)))
        with pytest.raises(ValueError):
            compose_seed(np.zeros((1, 3, 4, 5)), np.zeros((2, 5, 4, 5)))
        with pytest.raises(ValueError, match="class channels"):
            compose_seed(np.zeros((1, 3, 4, 5)), np.zeros((1, 4, 4, 5)))


def finite_difference_grad(vals: np.ndarray, labels: np.ndarray,
                           weights: LossWeights, h: float = 1e-3) -> np.ndarray:
    """Central-difference gradient of the total loss, one logit at a time."""
    grad = np.zeros_like(vals)
    it = np.nditer(vals, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        plus = vals.copy()
        plus[idx] += h
        minus = vals.copy()
        minus[idx] -= h
        lp, _ = loss(SemanticVolume(plus, kind="logits"), labels, weights)
        lm, _ = loss(SemanticVolume(minus, kind="logits"), labels, weights)
        grad[idx] = (lp - lm) / (2.0 * h)
    return grad


class TestLoss:
    WEIGHTS = LossWeights()

    def test_default_operating_point(self):
        np.testing.assert_allclose(self.WEIGHTS.w,
                                   [1.27e-4, 2.26e-2, 5.99, 3.93e-1, 2.50])
        assert self.WEIGHTS.dice_lambda == 2.5

    def test_perfect_prediction_drives_both_terms_to_zero(self):
        rng = np.random.default_rng(57)
        labels = rng.integers(0, 5, size=(4, 4, 3))
        vals = np.zeros((5, 4, 4, 3))
        for k in range(5):
            vals[k][labels == k] = 50.0
        total, _ = loss(SemanticVolume(vals, kind="logits"), labels, self.WEIGHTS)
        assert total == pytest.approx(0.0, abs=1e-4 * (1 + self.WEIGHTS.dice_lambda))
        ce_only, _ = loss(SemanticVolume(vals, kind="logits"), labels,
                          LossWeights(w=self.WEIGHTS.w, dice_lambda=0.0))
        assert ce_only == pytest.approx(0.0, abs=1e-4)
        sdice = (total - ce_only) / self.WEIGHTS.dice_lambda
        assert sdice == pytest.approx(0.0, abs=1e-4)

    def test_weighted_ce_term_non_negative(self):
        rng = np.random.default_rng(58)
        for _ in range(10):
            vals = rng.normal(size=(5, 3, 3, 2))
            labels = rng.integers(0, 5, size=(3, 3, 2))
            ce, _ = loss(SemanticVolume(vals, kind="logits"), labels,
                         LossWeights(w=self.WEIGHTS.w, dice_lambda=0.0))
            assert ce >= 0.0

    def test_gradient_matches_central_differences(self):
        rng = np.random.default_rng(59)
        worst = 0.0
        for _ in range(5):
            vals = rng.normal(size=(5, 4, 4, 3))
            labels = rng.integers(0, 5, size=(4, 4, 3))
            _, analytic = loss(SemanticVolume(vals, kind="logits"), labels, self.WEIGHTS)
            fd = finite_difference_grad(vals, labels, self.WEIGHTS)
            rel = np.abs(analytic - fd) / np.maximum(
                np.maximum(np.abs(analytic), np.abs(fd)), 1e-9)
            worst = max(worst, float(rel.max()))
        assert worst <= 1e-4

    def test_raising_correct_logit_lowers_loss(self):
        rng = np.random.default_rng(60)
        for _ in range(10):
            vals = rng.normal(size=(5, 2, 3, 2))
            labels = rng.integers(0, 5, size=(2, 3, 2))
            total, grad = loss(SemanticVolume(vals, kind="logits"), labels, self.WEIGHTS)
            r, a, e = (int(v) for v in rng.integers(0, (2, 3, 2)))
            k = int(labels[r, a, e])
            assert grad[k, r, a, e] < 0.0
            bumped = vals.copy()
            bumped[k, r, a, e] += 1e-3
            total2, _ = loss(SemanticVolume(bumped, kind="logits"), labels, self.WEIGHTS)
            assert total2 < total

    def test_label_out_of_range_rejected(self):
        vals = np.zeros((5, 2, 2, 2))
        labels = np.zeros((2, 2, 2), dtype=np.int64)
        labels[0, 0, 0] = 5
        with pytest.raises(ValueError, match="labels"):
            loss(SemanticVolume(vals, kind="logits"), labels, self.WEIGHTS)

    def test_requires_logits_kind(self):
        vals = np.full((5, 2, 2, 2), 0.2)
        with pytest.raises(ValueError, match="logits"):
            loss(SemanticVolume(vals, kind="probabilities"),
                 np.zeros((2, 2, 2), dtype=np.int64), self.WEIGHTS)

    def test_empty_volume_rejected(self):
        vals = np.zeros((5, 0, 2, 2))
        with pytest.raises(ValueError, match="empty"):
            loss(SemanticVolume(vals, kind="logits"),
                 np.zeros((0, 2, 2), dtype=np.int64), self.WEIGHTS)


class TestSemanticVolume:
    def test_probability_sum_enforced(self):
        vals = np.full((5, 2, 2, 2), 0.2)
        SemanticVolume(vals, kind="probabilities")  # sums to 1
        with pytest.raises(ValueError, match="sum to 1"):
            SemanticVolume(vals * 0.9, kind="probabilities")

    def test_bad_kind_rejected(self):
        with pytest.raises(ValueError, match="kind"):
            SemanticVolume(np.zeros((5, 2, 2, 2)), kind="scores")

    def test_weight_validation(self):
        with pytest.raises(ValueError):
            LossWeights(w=[1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            LossWeights(w=[0.0, 1.0, 1.0, 1.0, 1.0])
