"""Comparator math: forward contracts, losses, analytic gradients vs
central finite differences, Adam, the LR schedule, training behavior,
and checkpoint I/O."""

import json
import math

import numpy as np
import pytest

from semlink.corpus import split_corpus
from semlink.embedding import HashProvider
from semlink.siamese import (
    AdamState,
    BCE_EPS,
    DimensionMismatch,
    EmptyTrainSet,
    IoFailure,
    PARAM_NAMES,
    ShapeMismatch,
    TrainConfig,
    TrainingTriplet,
    VersionMismatch,
    adam_step,
    backward,
    bce_loss,
    forward,
    init_model,
    load_model,
    models_equal,
    save_model,
    score_matrix,
    score_rows,
    total_loss,
    train,
    triplet_loss,
    _draw_masks,
)

from synth import make_topic_corpus


def tiny_model(seed=0, dim_in=6, dim_proj=4, dim_hidden=4, dropout=0.0):
    return init_model(
        np.random.default_rng(seed),
        dim_in=dim_in,
        dim_proj=dim_proj,
        dim_hidden=dim_hidden,
        dropout_rate=dropout,
    )


def full_model(seed=0):
    return init_model(np.random.default_rng(seed))


class TestForward:
    def test_identity_inputs_give_model_constant(self):
        model = full_model(1)
        rng = np.random.default_rng(2)
        x = rng.normal(size=512)
        y = rng.normal(size=512)
        score_x, _ = forward(model, x, x)
        score_y, _ = forward(model, y, y)
        assert score_x == score_y

    def test_symmetry_exact_in_eval_mode(self):
        model = full_model(3)
        rng = np.random.default_rng(4)
        for _ in range(20):
            a, b = rng.normal(size=512), rng.normal(size=512)
            assert forward(model, a, b)[0] == forward(model, b, a)[0]

    def test_output_strictly_in_unit_interval(self):
        model = full_model(5)
        rng = np.random.default_rng(6)
        for _ in range(1000):
            a, b = rng.normal(size=512), rng.normal(size=512)
            score, _ = forward(model, a, b)
            assert 0.0 < score < 1.0

    def test_dimension_mismatch(self):
        model = full_model(7)
        with pytest.raises(DimensionMismatch):
            forward(model, np.zeros(511), np.zeros(512))

    def test_train_mode_requires_rng(self):
        model = tiny_model(dropout=0.5)
        with pytest.raises(ValueError):
            forward(model, np.zeros(6), np.ones(6), train_mode=True)

    def test_eval_mode_deterministic_train_mode_not(self):
        model = tiny_model(8, dropout=0.5)
        a, b = np.ones(6), np.zeros(6)
        eval_scores = {forward(model, a, b)[0] for _ in range(5)}
        assert len(eval_scores) == 1
        rng = np.random.default_rng(9)
        train_scores = {forward(model, a, b, train_mode=True, rng=rng)[0] for _ in range(10)}
        assert len(train_scores) > 1

    def test_score_matrix_agrees_with_forward(self):
        model = full_model(10)
        rng = np.random.default_rng(11)
        sources = rng.normal(size=(3, 512))
        targets = rng.normal(size=(4, 512))
        matrix = score_matrix(model, sources, targets)
        for i in range(3):
            for j in range(4):
                single, _ = forward(model, sources[i], targets[j])
                assert matrix[i, j] == pytest.approx(single, abs=1e-12)

    def test_score_rows_agrees_with_forward(self):
        model = full_model(12)
        rng = np.random.default_rng(13)
        sources = rng.normal(size=(5, 512))
        targets = rng.normal(size=(5, 512))
        rows = score_rows(model, sources, targets)
        for i in range(5):
            assert rows[i] == pytest.approx(forward(model, sources[i], targets[i])[0], abs=1e-12)


class TestLosses:
    def test_bce_half(self):
        assert bce_loss(0.0, 0.5) == pytest.approx(0.693147, abs=1e-6)

    def test_bce_point_one(self):
        assert bce_loss(1.0, 0.1) == pytest.approx(2.302585, abs=1e-6)

    def test_bce_perfect_prediction_near_zero(self):
        assert bce_loss(1.0, 1.0 - BCE_EPS) == pytest.approx(0.0, abs=1e-6)

    def test_bce_clamps_endpoints(self):
        assert math.isfinite(bce_loss(1.0, 0.0))
        assert math.isfinite(bce_loss(0.0, 1.0))
        assert bce_loss(1.0, 0.0) == pytest.approx(-math.log(BCE_EPS))

    def test_bce_nonnegative(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            assert bce_loss(float(rng.integers(0, 2)), float(rng.random())) >= 0.0

    def test_triplet_margin_satisfied(self):
        model = tiny_model(20)
        anchor = np.ones(6)
        # positive identical to anchor; negative far away
        far = anchor + 50.0 * np.ones(6)
        value = triplet_loss(
            model, TrainingTriplet(anchor, anchor, far), margin=1.0
        )
        assert value == 0.0

    def test_triplet_collapsed_equals_margin(self):
        model = tiny_model(21)
        x = np.full(6, 0.3)
        triplet = TrainingTriplet(x, x, x)
        assert triplet_loss(model, triplet, margin=1.0) == 1.0

    def test_triplet_requires_positive_margin(self):
        model = tiny_model(22)
        x = np.zeros(6)
        with pytest.raises(ValueError):
            triplet_loss(model, TrainingTriplet(x, x, x), margin=0.0)

    def test_triplet_nonnegative(self):
        model = tiny_model(23)
        rng = np.random.default_rng(24)
        for _ in range(100):
            t = TrainingTriplet(*rng.normal(size=(3, 6)))
            assert triplet_loss(model, t, margin=1.0) >= 0.0

    def test_total_loss_reduces_to_bce_sum_at_optimal_weights(self):
        model = tiny_model(25)
        rng = np.random.default_rng(26)
        t = TrainingTriplet(*rng.normal(size=(3, 6)))
        config = TrainConfig(lambda_triplet=0.0, lambda_bce=1.0)
        yhat_p, _ = forward(model, t.anchor, t.positive)
        yhat_n, _ = forward(model, t.anchor, t.negative)
        expected = bce_loss(1.0, yhat_p) + bce_loss(0.0, yhat_n)
        assert total_loss(model, t, config) == pytest.approx(expected, abs=1e-12)

    def test_total_loss_triplet_only_collapsed(self):
        model = tiny_model(27)
        x = np.full(6, -0.2)
        t = TrainingTriplet(x, x, x)
        config = TrainConfig(lambda_triplet=1.0, lambda_bce=0.0, triplet_margin=1.0)
        assert total_loss(model, t, config) == 1.0

    def test_shipped_default_weights(self):
        config = TrainConfig()
        assert config.lambda_triplet == 0.0
        assert config.lambda_bce == 1.0
        assert config.triplet_margin == 1.0


def finite_difference_check(model, batch, config, masks=None, step=1e-5):
    """Max relative error |analytic - central difference| / max(1, |fd|)
    over every parameter entry."""
    _loss, grads = backward(model, batch, config, masks=masks)

    def loss_at() -> float:
        value, _ = backward(model, batch, config, masks=masks)
        return value

    worst = 0.0
    for name in PARAM_NAMES:
        param = model.params()[name]
        flat_grad = np.atleast_1d(grads[name]).ravel()
        flat_param = np.atleast_1d(param).ravel()
        for k in range(flat_param.size):
            original = flat_param[k]
            if name == "out_b":
                model.out_b = original + step
                up = loss_at()
                model.out_b = original - step
                down = loss_at()
                model.out_b = original
            else:
                flat_param[k] = original + step
                up = loss_at()
                flat_param[k] = original - step
                down = loss_at()
                flat_param[k] = original
            fd = (up - down) / (2 * step)
            err = abs(flat_grad[k] - fd) / max(1.0, abs(fd))
            worst = max(worst, err)
    return worst


def random_batch(rng, size, dim):
    return [TrainingTriplet(*rng.normal(size=(3, dim))) for _ in range(size)]


class TestGradients:
    def test_matches_finite_differences_bce_only(self):
        rng = np.random.default_rng(30)
        model = tiny_model(31)
        batch = random_batch(rng, 4, 6)
        config = TrainConfig(lambda_triplet=0.0, lambda_bce=1.0)
        assert finite_difference_check(model, batch, config) < 1e-4

    def test_matches_finite_differences_hybrid(self):
        rng = np.random.default_rng(32)
        model = tiny_model(33)
        batch = random_batch(rng, 3, 6)
        config = TrainConfig(lambda_triplet=0.7, lambda_bce=0.5, triplet_margin=1.0)
        assert finite_difference_check(model, batch, config) < 1e-4

    def test_matches_finite_differences_with_dropout_masks(self):
        rng = np.random.default_rng(34)
        model = tiny_model(35, dropout=0.5)
        batch = random_batch(rng, 3, 6)
        config = TrainConfig(lambda_triplet=0.0, lambda_bce=1.0, dropout_rate=0.5)
        masks = {
            key: _draw_masks(rng, (3, model.dim_hidden), 0.5)
            for key in ("m1_pos", "m2_pos", "m1_neg", "m2_neg")
        }
        assert finite_difference_check(model, batch, config, masks=masks) < 1e-4

    def test_zero_loss_batch_zero_gradients(self):
        model = tiny_model(36)
        rng = np.random.default_rng(37)
        anchor = rng.normal(size=6)
        far = anchor + 100.0
        batch = [TrainingTriplet(anchor, anchor.copy(), far)]
        config = TrainConfig(lambda_triplet=1.0, lambda_bce=0.0, triplet_margin=1.0)
        loss, grads = backward(model, batch, config)
        assert loss == 0.0
        for name in PARAM_NAMES:
            assert np.all(np.atleast_1d(grads[name]) == 0.0)

    def test_shared_projection_sees_both_branches(self):
        model = tiny_model(38)
        rng = np.random.default_rng(39)
        anchor = rng.normal(size=6)
        positive = rng.normal(size=6)
        negative = rng.normal(size=6)
        config = TrainConfig(lambda_triplet=0.0, lambda_bce=1.0)
        _, grads_base = backward(model, [TrainingTriplet(anchor, positive, negative)], config)
        perturbed = positive + 0.5
        _, grads_perturbed = backward(
            model, [TrainingTriplet(anchor, perturbed, negative)], config
        )
        assert not np.allclose(grads_base["proj_w"], grads_perturbed["proj_w"])


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        model = tiny_model(40)
        state = AdamState.for_model(model)
        before = {k: v.copy() for k, v in model.params().items()}
        zero = {k: np.zeros_like(v) for k, v in model.params().items()}
        adam_step(model, zero, state, lr=1e-3)
        for name in PARAM_NAMES:
            assert np.array_equal(model.params()[name], before[name])

    def test_single_step_magnitude_near_lr(self):
        model = tiny_model(41)
        state = AdamState.for_model(model)
        ones = {k: np.ones_like(v) for k, v in model.params().items()}
        before = model.proj_w.copy()
        adam_step(model, ones, state, lr=1e-3)
        delta = before - model.proj_w
        # m_hat/sqrt(v_hat) == 1 exactly after one unit-gradient step
        np.testing.assert_allclose(delta, 1e-3 / (1 + 1e-8), rtol=1e-9)

    def test_constant_gradient_moves_monotonically(self):
        model = tiny_model(42)
        state = AdamState.for_model(model)
        ones = {k: np.ones_like(v) for k, v in model.params().items()}
        trace = [model.proj_w[0, 0]]
        for _ in range(10):
            adam_step(model, ones, state, lr=1e-2)
            trace.append(model.proj_w[0, 0])
        diffs = np.diff(trace)
        assert np.all(diffs < 0.0)  # moves against +1 gradient every step


class TestLrSchedule:
    def test_decay_table(self):
        config = TrainConfig(learning_rate=1e-3, lr_decay_factor=0.8, lr_decay_every=50)
        expected = {
            1: 1e-3,
            50: 1e-3,
            51: 1e-3 * 0.8,
            101: 1e-3 * 0.8**2,
            151: 1e-3 * 0.8**3,
            200: 1e-3 * 0.8**3,
        }
        for epoch, lr in expected.items():
            assert config.effective_lr(epoch) == pytest.approx(lr, rel=1e-12)


class TestTrainConfigValidation:
    def test_defaults_follow_training_protocol(self):
        config = TrainConfig()
        assert config.epochs == 200
        assert config.learning_rate == 1e-3
        assert config.lr_decay_factor == 0.8
        assert config.lr_decay_every == 50

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(lambda_triplet=0.0, lambda_bce=0.0)
        with pytest.raises(ValueError):
            TrainConfig(triplet_margin=-1.0)
        with pytest.raises(ValueError):
            TrainConfig(dropout_rate=1.0)


@pytest.fixture(scope="module")
def small_split():
    pairs = make_topic_corpus(pages_per_topic=8, seed=55)  # 40 pairs
    return split_corpus(pairs, ratio=0.85, seed=3)


class TestTrain:
    def test_loss_decreases_by_half_over_training(self, small_split):
        model, history = train(
            small_split, HashProvider(), TrainConfig(epochs=200, seed=5), tau=0.7
        )
        assert history[-1].mean_loss <= 0.5 * history[0].mean_loss

    def test_deterministic_under_seed(self, small_split):
        config = TrainConfig(epochs=5, seed=99)
        model_a, hist_a = train(small_split, HashProvider(), config, tau=0.7)
        model_b, hist_b = train(small_split, HashProvider(), config, tau=0.7)
        assert models_equal(model_a, model_b)
        assert hist_a == hist_b

    def test_history_shape(self, small_split):
        _model, history = train(
            small_split, HashProvider(), TrainConfig(epochs=3, seed=1), tau=0.7
        )
        assert [h.epoch for h in history] == [1, 2, 3]
        assert all(h.lr == 1e-3 for h in history)
        assert all(h.val_f1 is None or 0.0 <= h.val_f1 <= 1.0 for h in history)

    def test_empty_train_set(self):
        from semlink.corpus import CorpusSplit

        with pytest.raises(EmptyTrainSet):
            train(
                CorpusSplit(train=(), validation=(), seed=0),
                HashProvider(),
                TrainConfig(epochs=1),
            )

    def test_fingerprint_recorded(self, small_split):
        model, _ = train(
            small_split, HashProvider(), TrainConfig(epochs=2, seed=4), tau=0.7
        )
        assert model.fingerprint["epochs"] == 2
        assert model.fingerprint["seed"] == 4
        assert model.fingerprint["provider"] == HashProvider.descriptor


class TestCheckpointIo:
    def test_round_trip_bit_exact(self, tmp_path):
        model = full_model(60)
        model.fingerprint = {"note": "test"}
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert models_equal(model, loaded)
        assert loaded.out_b == model.out_b
        assert loaded.dropout_rate == model.dropout_rate
        assert loaded.fingerprint == {"note": "test"}

    def test_checkpoint_format_fields(self, tmp_path):
        model = full_model(61)
        path = tmp_path / "model.json"
        save_model(model, path)
        document = json.loads(path.read_text())
        assert document["format"] == "semlink-model-v1"
        assert document["dim_in"] == 512
        assert document["dim_proj"] == 128
        assert set(document["layers"]) == {"projection", "hidden1", "hidden2", "output"}
        assert len(document["layers"]["output"]["w"]) == 128
        assert len(document["layers"]["output"]["w"][0]) == 1

    def test_version_mismatch(self, tmp_path):
        model = full_model(62)
        path = tmp_path / "model.json"
        save_model(model, path)
        document = json.loads(path.read_text())
        document["format"] = "semlink-model-v2"
        path.write_text(json.dumps(document))
        with pytest.raises(VersionMismatch):
            load_model(path)

    def test_shape_mismatch(self, tmp_path):
        model = full_model(63)
        path = tmp_path / "model.json"
        save_model(model, path)
        document = json.loads(path.read_text())
        document["layers"]["hidden1"]["w"] = [[0.0] * 128 for _ in range(64)]
        path.write_text(json.dumps(document))
        with pytest.raises(ShapeMismatch):
            load_model(path)

    def test_truncated_file_io_failure(self, tmp_path):
        model = full_model(64)
        path = tmp_path / "model.json"
        save_model(model, path)
        raw = path.read_text()
        for cut in (len(raw) // 3, len(raw) // 2, len(raw) - 5):
            path.write_text(raw[:cut])
            with pytest.raises(IoFailure):
                load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoFailure):
            load_model(tmp_path / "absent.json")
