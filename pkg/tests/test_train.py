import numpy as np
import pytest

from graphpoison.models import ModelConfig, TrainConfig, forward, init_model
from graphpoison.sbm import SbmParams, generate_sbm
from graphpoison.train import (DivergenceError, accuracy, load_model,
                               masked_cross_entropy, predict, predict_proba,
                               save_model, softmax, train)

from conftest import toy_bundle


class TestMaskedCrossEntropy:
    def test_uniform_logits_give_log_classes(self):
        logits = np.zeros((3, 7), dtype=np.float32)
        labels = np.array([0, 3, 6])
        loss, _ = masked_cross_entropy(logits, labels, np.ones(3, dtype=bool))
        assert loss == pytest.approx(np.log(7), abs=1e-6)

    def test_confident_correct_logits_drive_loss_to_zero(self):
        labels = np.array([1, 0])
        mask = np.ones(2, dtype=bool)
        losses = []
        for margin in (1.0, 5.0, 20.0):
            logits = np.array([[0.0, margin], [margin, 0.0]], dtype=np.float32)
            losses.append(masked_cross_entropy(logits, labels, mask)[0])
        assert losses[0] > losses[1] > losses[2]
        assert losses[2] < 1e-6

    def test_gradient_zero_outside_mask(self):
        logits = np.random.default_rng(0).random((4, 3)).astype(np.float32)
        labels = np.array([0, 1, 2, 0])
        mask = np.array([True, False, True, False])
        _, grad = masked_cross_entropy(logits, labels, mask)
        assert np.all(grad[[1, 3]] == 0)
        assert np.abs(grad[[0, 2]]).sum() > 0

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        logits = rng.normal(size=(4, 3)).astype(np.float64)
        labels = np.array([2, 0, 1, 1])
        mask = np.array([True, True, False, True])
        _, grad = masked_cross_entropy(logits, labels, mask)
        h = 1e-3
        for i in range(4):
            for j in range(3):
                up, down = logits.copy(), logits.copy()
                up[i, j] += h
                down[i, j] -= h
                fd = (masked_cross_entropy(up, labels, mask)[0]
                      - masked_cross_entropy(down, labels, mask)[0]) / (2 * h)
                assert fd == pytest.approx(grad[i, j], rel=1e-3, abs=1e-9)

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError, match="no nodes"):
            masked_cross_entropy(np.zeros((2, 2)), np.zeros(2, dtype=int),
                                 np.zeros(2, dtype=bool))


def separable_bundle(seed=0):
    protos = np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]])
    return generate_sbm(SbmParams(block_sizes=(20, 20), p_intra=0.3, p_inter=0.02,
                                  prototypes=protos, noise_scale=0.05, seed=seed))


class TestTraining:
    def test_separable_data_reaches_full_train_accuracy(self):
        g = separable_bundle()
        mc = ModelConfig(arch="graphsage", hidden=8, layers=2, dropout=0.0)
        model = train(g, mc, TrainConfig(epochs=400, lr=0.01, seed=0))
        assert accuracy(model, g, g.train_mask) == 1.0

    def test_deterministic_given_seeds(self):
        g = separable_bundle()
        mc = ModelConfig(arch="chebnet", hidden=8, layers=2, dropout=0.2)
        tc = TrainConfig(epochs=50, lr=0.01, seed=3)
        a = train(g, mc, tc)
        b = train(g, mc, tc)
        for pa, pb in zip(a.params, b.params):
            assert pa.tobytes() == pb.tobytes()
        assert a.final_train_loss == b.final_train_loss

    def test_different_seed_changes_parameters(self):
        g = separable_bundle()
        mc = ModelConfig(hidden=8, dropout=0.0)
        a = train(g, mc, TrainConfig(epochs=20, seed=0))
        b = train(g, mc, TrainConfig(epochs=20, seed=1))
        assert a.params[0].tobytes() != b.params[0].tobytes()

    def test_divergence_aborts_with_diagnostic(self):
        g = separable_bundle()
        mc = ModelConfig(hidden=8, dropout=0.0)
        with pytest.raises(DivergenceError, match="non-finite loss"):
            train(g, mc, TrainConfig(epochs=400, lr=1e30, seed=0))

    def test_empty_train_mask_rejected(self):
        tags = np.array(["test", "test"], dtype=object)
        g = toy_bundle([(0, 1)], labels=[0, 1], tags=tags)
        with pytest.raises(ValueError, match="train mask"):
            train(g, ModelConfig(hidden=4), TrainConfig(epochs=1))

    def test_loss_is_finite_and_recorded(self):
        g = separable_bundle()
        model = train(g, ModelConfig(hidden=8), TrainConfig(epochs=30, seed=0))
        assert np.isfinite(model.final_train_loss)


class TestPrediction:
    def test_argmax_row(self):
        g = toy_bundle([(0, 1)], labels=[1, 0], d=3)
        m = init_model(ModelConfig(hidden=4, dropout=0.0), d=3, c=3, seed=0)
        logits = forward(m, g)
        np.testing.assert_array_equal(predict(m, g), logits.argmax(axis=1))

    def test_tie_goes_to_lowest_class(self):
        logits = np.array([[0.5, 0.5], [0.1, 0.9]])
        assert logits.argmax(axis=1).tolist() == [0, 1]  # documents the np rule we rely on

    def test_prediction_matches_recomputed_forward(self, sbm30):
        m = train(sbm30, ModelConfig(hidden=8, dropout=0.0),
                  TrainConfig(epochs=50, seed=0))
        expected = forward(m, sbm30, training_mode=False).argmax(axis=1)
        np.testing.assert_array_equal(predict(m, sbm30), expected)

    def test_probabilities_sum_to_one(self, sbm30):
        m = train(sbm30, ModelConfig(hidden=8), TrainConfig(epochs=30, seed=0))
        probs = predict_proba(m, sbm30)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-5)

    def test_softmax_shift_invariance(self):
        logits = np.array([[1e4, 1e4 + 1.0]])
        probs = softmax(logits)
        assert np.isfinite(probs).all()


class TestAccuracy:
    def test_all_correct(self, sbm30):
        m = train(sbm30, ModelConfig(hidden=8, dropout=0.0),
                  TrainConfig(epochs=400, seed=0))
        assert accuracy(m, sbm30, sbm30.train_mask) == 1.0

    def test_adversarial_label_permutation_zeroes_accuracy(self, sbm30):
        m = train(sbm30, ModelConfig(hidden=8, dropout=0.0),
                  TrainConfig(epochs=400, seed=0))
        flipped = sbm30.with_labels(1 - sbm30.labels)
        assert accuracy(m, flipped, flipped.train_mask) == 0.0

    def test_manual_count(self):
        g = toy_bundle([(0, 1)], labels=[0, 1, 0, 1, 0, 1, 0, 1, 0, 1], d=2)
        m = init_model(ModelConfig(hidden=2, dropout=0.0), d=2, c=2, seed=0)
        preds = predict(m, g)
        expected = sum(int(p == l) for p, l in zip(preds, g.labels)) / 10
        assert accuracy(m, g, np.ones(10, dtype=bool)) == pytest.approx(expected)

    def test_empty_mask_rejected(self, sbm30):
        m = init_model(ModelConfig(hidden=4), d=sbm30.num_features,
                       c=sbm30.num_classes)
        with pytest.raises(ValueError, match="no nodes"):
            accuracy(m, sbm30, np.zeros(sbm30.num_nodes, dtype=bool))


class TestCheckpoints:
    def test_round_trip_bit_identical(self, tmp_path, sbm30):
        m = train(sbm30, ModelConfig(arch="chebnet", hidden=8, cheb_k=2),
                  TrainConfig(epochs=10, seed=0))
        save_model(m, tmp_path)
        loaded = load_model(tmp_path)
        assert loaded.arch == m.arch
        assert loaded.model_config == m.model_config
        assert loaded.train_config == m.train_config
        for pa, pb in zip(m.params, loaded.params):
            assert pa.tobytes() == pb.tobytes()
        np.testing.assert_array_equal(predict(loaded, sbm30), predict(m, sbm30))

    def test_model_json_echoes_configs(self, tmp_path, sbm30):
        import json
        m = train(sbm30, ModelConfig(hidden=4), TrainConfig(epochs=5, seed=7))
        save_model(m, tmp_path)
        doc = json.loads((tmp_path / "model.json").read_text())
        assert doc["train_config"]["seed"] == 7
        assert doc["model_config"]["hidden"] == 4
        assert doc["arch"] == "graphsage"
