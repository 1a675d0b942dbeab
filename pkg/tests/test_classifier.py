import math

import numpy as np
import pytest

from pudefect.classifier import (
    MlpConfig,
    Parameters,
    bce_loss,
    classify,
    dropout_mask,
    forward,
    gradients,
    init_params,
    mix_pairs,
    mixup_batch,
    model_from_json,
    model_to_json,
    predict_batch,
    train,
)
from pudefect.data import FeatureMatrix, LabeledDataset
from pudefect.errors import ConfigError, DataError
from pudefect.seeding import make_rng
from pudefect.synth import BlobSpec, gen_blobs

# -(0.3*ln 0.3 + 0.7*ln 0.7), frozen from direct evaluation
BCE_03_03 = 0.6108643020548935


def zero_params(cfg: MlpConfig) -> Parameters:
    d, (h1, h2) = cfg.input_dim, cfg.hidden_sizes
    return Parameters(
        W1=np.zeros((d, h1)),
        b1=np.zeros(h1),
        W2=np.zeros((h1, h2)),
        b2=np.zeros(h2),
        W3=np.zeros((h2, 1)),
        b3=np.zeros(1),
    )


class TestInitParams:
    def test_biases_zero(self):
        params = init_params(MlpConfig(input_dim=10), seed=1)
        assert not params.b1.any() and not params.b2.any() and not params.b3.any()

    def test_determinism(self):
        cfg = MlpConfig(input_dim=12, hidden_sizes=(8, 4))
        a, b = init_params(cfg, seed=5), init_params(cfg, seed=5)
        assert all(np.array_equal(x, y) for x, y in zip(a.arrays(), b.arrays()))

    def test_scaled_variance(self):
        cfg = MlpConfig(input_dim=512, hidden_sizes=(256, 128))
        params = init_params(cfg, seed=9)
        assert params.W1.var() == pytest.approx(2.0 / 512, rel=0.2)
        assert params.W2.var() == pytest.approx(2.0 / 256, rel=0.2)
        assert params.W3.var() == pytest.approx(1.0 / 128, rel=0.5)


class TestForward:
    def test_zero_params_give_half(self):
        cfg = MlpConfig(input_dim=3)
        out = forward(zero_params(cfg), np.array([1.0, -2.0, 3.0]), cfg)
        assert out[0] == 0.5

    def test_eval_deterministic(self):
        cfg = MlpConfig(input_dim=4, hidden_sizes=(8, 4))
        params = init_params(cfg, seed=2)
        x = np.random.default_rng(0).normal(size=(5, 4))
        assert np.array_equal(forward(params, x, cfg), forward(params, x, cfg))

    def test_train_mode_needs_seed_when_dropping(self):
        cfg = MlpConfig(input_dim=2, dropout_rate=0.5)
        with pytest.raises(ConfigError):
            forward(zero_params(cfg), np.array([1.0, 1.0]), cfg, mode="train")

    def test_dropout_mc_matches_eval(self):
        # residual gap is downstream-nonlinearity bias; small for this draw
        cfg = MlpConfig(input_dim=6, hidden_sizes=(16, 8), dropout_rate=0.2)
        params = init_params(cfg, seed=505)
        x = np.random.default_rng(7).normal(size=(1, 6))
        ev = forward(params, x, cfg, mode="eval")[0]
        mc = np.mean([forward(params, x, cfg, mode="train", seed=s)[0] for s in range(10_000)])
        assert mc == pytest.approx(ev, rel=0.02)

    def test_mask_expectation_is_identity(self):
        masks = [dropout_mask(make_rng(s), (2, 64), 0.2) for s in range(20_000)]
        assert np.abs(np.mean(masks, axis=0) - 1.0).max() < 0.02

    def test_dimension_mismatch(self):
        cfg = MlpConfig(input_dim=3)
        with pytest.raises(DataError):
            forward(zero_params(cfg), np.array([1.0, 2.0]), cfg)


class TestBceLoss:
    def test_half_prob_positive(self):
        assert bce_loss(0.5, 1.0) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_confident_correct_is_zero(self):
        assert bce_loss(1.0 - 1e-9, 1.0) == pytest.approx(0.0, abs=1e-6)

    def test_fractional_target(self):
        assert bce_loss(0.3, 0.3) == pytest.approx(BCE_03_03, abs=1e-12)
        assert abs(bce_loss(0.3, 0.3) - 0.610864) < 1e-6

    def test_clamp_bounds_loss(self):
        assert bce_loss(0.0, 1.0) <= -math.log(1e-7) + 1e-9
        assert bce_loss(1.0, 0.0) <= -math.log(1e-7) + 1e-9


class TestGradients:
    def test_zero_net_output_bias_gradient(self):
        cfg = MlpConfig(input_dim=2)
        _, grads = gradients(zero_params(cfg), np.array([[1.0, 2.0]]), np.array([1.0]), cfg)
        assert grads.b3[0] == pytest.approx(-0.5, abs=1e-15)

    @pytest.mark.parametrize("seed,use_mask", [(1, False), (2, False), (3, True)])
    def test_finite_difference_oracle(self, seed, use_mask):
        cfg = MlpConfig(input_dim=5, hidden_sizes=(6, 4), dropout_rate=0.2 if use_mask else 0.0)
        params = init_params(cfg, seed=seed)
        rng = np.random.default_rng(seed + 100)
        X = rng.normal(size=(6, 5))
        y = rng.integers(0, 2, size=6).astype(float)
        mask = None
        if use_mask:
            mask = dropout_mask(make_rng(seed), (6, 6), cfg.dropout_rate)
        _, grads = gradients(params, X, y, cfg, mask)
        max_rel = _max_fd_rel_error(params, X, y, cfg, mask, grads)
        assert max_rel < 1e-4

    def test_batch_gradient_is_mean_of_singles(self):
        cfg = MlpConfig(input_dim=4, hidden_sizes=(5, 3), dropout_rate=0.0)
        params = init_params(cfg, seed=8)
        rng = np.random.default_rng(42)
        X = rng.normal(size=(7, 4))
        y = rng.integers(0, 2, size=7).astype(float)
        _, batch = gradients(params, X, y, cfg)
        singles = [gradients(params, X[i : i + 1], y[i : i + 1], cfg)[1] for i in range(7)]
        for j, arr in enumerate(batch.arrays()):
            mean_single = np.mean([s.arrays()[j] for s in singles], axis=0)
            assert np.allclose(arr, mean_single, atol=1e-14)

    def test_empty_batch_error(self):
        cfg = MlpConfig(input_dim=2)
        with pytest.raises(DataError):
            gradients(zero_params(cfg), np.zeros((0, 2)), np.zeros(0), cfg)


def _max_fd_rel_error(params, X, y, cfg, mask, grads, step=1e-5):
    def loss_at():
        p = forward(params, X, cfg, mode="train" if mask is not None else "eval", mask=mask)
        return bce_loss(p, y)

    worst = 0.0
    for arr, grad in zip(params.arrays(), grads.arrays()):
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            up = loss_at()
            arr[idx] = orig - step
            down = loss_at()
            arr[idx] = orig
            fd = (up - down) / (2.0 * step)
            denom = max(abs(fd), abs(grad[idx]), 1e-6)
            worst = max(worst, abs(fd - grad[idx]) / denom)
    return worst


class TestMixup:
    def test_alpha_zero_identity(self):
        X = np.arange(12, dtype=float).reshape(4, 3)
        y = np.array([0.0, 1.0, 1.0, 0.0])
        mixed = mixup_batch(X, y, alpha=0.0, seed=3)
        assert np.array_equal(mixed.features, X)
        assert np.array_equal(mixed.targets, y)
        assert np.all(mixed.lambdas == 1.0)

    def test_midpoint_formula(self):
        X = np.array([[0.0, 0.0], [2.0, 4.0]])
        y = np.array([1.0, 0.0])
        mixed_x, mixed_y = mix_pairs(X, y, partner=np.array([1, 0]), lam=np.array([0.5, 0.5]))
        assert np.array_equal(mixed_x[0], [1.0, 2.0])
        assert mixed_y[0] == 0.5

    def test_outputs_are_exact_convex_combinations(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(32, 4))
        y = rng.integers(0, 2, size=32).astype(float)
        mixed = mixup_batch(X, y, alpha=0.2, seed=11)
        lam = mixed.lambdas[:, None]
        assert np.array_equal(mixed.features, lam * X + (1 - lam) * X[mixed.partners])
        assert np.all((mixed.targets >= 0.0) & (mixed.targets <= 1.0))

    def test_lambda_sampler_statistics(self):
        X = np.zeros((10_000, 1))
        y = np.zeros(10_000)
        mixed = mixup_batch(X, y, alpha=0.2, seed=13)
        assert abs(mixed.lambdas.mean() - 0.5) < 0.02

    def test_determinism(self):
        X = np.random.default_rng(1).normal(size=(16, 2))
        y = np.zeros(16)
        a = mixup_batch(X, y, alpha=0.4, seed=21)
        b = mixup_batch(X, y, alpha=0.4, seed=21)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.lambdas, b.lambdas)


class TestTrain:
    def test_separable_blobs_converge(self):
        blobs = gen_blobs(BlobSpec(n_per_class=100, d=2, separation=6.0, seed=3))
        model = train(blobs, MlpConfig(input_dim=2, epochs=20, seed=5))
        acc = (classify(predict_batch(model, blobs.features)) == blobs.labels).mean()
        assert acc >= 0.99
        assert model.history[-1] < model.history[0]
        assert len(model.history) == 20

    def test_bit_identical_reruns(self):
        blobs = gen_blobs(BlobSpec(n_per_class=30, d=3, separation=4.0, seed=6))
        cfg = MlpConfig(input_dim=3, epochs=5, seed=7)
        a, b = train(blobs, cfg), train(blobs, cfg)
        for x, y in zip(a.params.arrays(), b.params.arrays()):
            assert x.tobytes() == y.tobytes()
        assert a.history == b.history

    def test_single_class_error(self):
        feats = FeatureMatrix(np.random.default_rng(2).normal(size=(10, 2)).astype(np.float32))
        data = LabeledDataset(feats, np.ones(10, dtype=np.int8))
        with pytest.raises(DataError, match="both classes"):
            train(data, MlpConfig(input_dim=2))

    def test_zero_epochs_returns_init(self):
        blobs = gen_blobs(BlobSpec(n_per_class=10, d=2, separation=2.0, seed=8))
        model = train(blobs, MlpConfig(input_dim=2, epochs=0, seed=1))
        assert model.history == []


class TestPredict:
    def test_empty_input(self):
        blobs = gen_blobs(BlobSpec(n_per_class=10, d=2, separation=4.0, seed=9))
        model = train(blobs, MlpConfig(input_dim=2, epochs=2, seed=1))
        probs = predict_batch(model, FeatureMatrix(np.zeros((0, 2), np.float32)))
        assert probs.shape == (0,)
        assert classify(probs).shape == (0,)

    def test_batch_equals_per_row_loop(self):
        # BLAS picks shape-dependent kernels, so agreement is to the ulp,
        # not bitwise
        blobs = gen_blobs(BlobSpec(n_per_class=20, d=3, separation=4.0, seed=10))
        model = train(blobs, MlpConfig(input_dim=3, epochs=3, seed=2))
        probe = np.random.default_rng(3).normal(size=(15, 3)).astype(np.float32)
        batch = predict_batch(model, FeatureMatrix(probe))
        for i in range(15):
            single = predict_batch(model, FeatureMatrix(probe[i : i + 1]))
            assert batch[i] == pytest.approx(single[0], abs=1e-13)

    def test_tie_goes_positive(self):
        assert classify(np.array([0.5, 0.49999]))[0] == 1
        assert classify(np.array([0.5, 0.49999]))[1] == 0


class TestSerialization:
    def test_roundtrip_identical_predictions(self):
        blobs = gen_blobs(BlobSpec(n_per_class=25, d=4, separation=4.0, seed=11))
        model = train(blobs, MlpConfig(input_dim=4, epochs=4, seed=3))
        restored = model_from_json(model_to_json(model))
        probe = FeatureMatrix(np.random.default_rng(5).normal(size=(30, 4)).astype(np.float32))
        assert np.array_equal(predict_batch(model, probe), predict_batch(restored, probe))
        assert restored.history == model.history
