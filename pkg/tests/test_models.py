import numpy as np
import pytest

from dcr import autodiff as ad
from dcr.errors import ConfigError, ShapeMismatchError
from dcr.models import DcrModel, MlpSpec, default_specs

from oracles import check_gradients


def tiny_model(seed=0, annotators=3):
    return DcrModel(MlpSpec((5, 8, 4)), MlpSpec((4, 1)), MlpSpec((4, annotators)), seed=seed)


class TestInit:
    def test_same_seed_identical_parameters(self):
        a, b = tiny_model(seed=9), tiny_model(seed=9)
        for (_, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert np.array_equal(pa.value, pb.value)

    def test_biases_zero(self):
        model = tiny_model()
        for name, node in model.named_parameters():
            if name.endswith("bias"):
                assert np.array_equal(node.value, np.zeros_like(node.value))

    def test_weights_within_fan_in_bound(self):
        model = DcrModel(MlpSpec((100, 50)), MlpSpec((50, 1)), MlpSpec((50, 2)), seed=1)
        w = model.embedder_layers[0][0].value
        assert np.all(np.abs(w) <= 1.0 / np.sqrt(100))

    def test_weight_sample_mean_near_zero(self):
        # 10^4 draws from uniform(-a, a): |sample mean| < 3*sigma/100
        model = DcrModel(MlpSpec((100, 100)), MlpSpec((100, 1)), MlpSpec((100, 2)), seed=4)
        w = model.embedder_layers[0][0].value
        sigma = (1.0 / np.sqrt(100)) / np.sqrt(3.0)
        assert abs(w.mean()) < 3.0 * sigma / 100.0

    def test_inconsistent_widths_rejected(self):
        with pytest.raises(ConfigError, match="must match"):
            DcrModel(MlpSpec((5, 8)), MlpSpec((4, 1)), MlpSpec((8, 2)))
        with pytest.raises(ConfigError, match="width 1"):
            DcrModel(MlpSpec((5, 8)), MlpSpec((8, 2)), MlpSpec((8, 2)))

    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            MlpSpec((5,))
        with pytest.raises(ConfigError):
            MlpSpec((5, 0))
        with pytest.raises(ConfigError):
            MlpSpec((5, 3), activation="sigmoid")


class TestForwardPasses:
    def test_identity_embedder(self):
        model = DcrModel(MlpSpec((4, 4)), MlpSpec((4, 1)), MlpSpec((4, 2)), seed=0)
        model.embedder_layers[0][0].assign(np.eye(4))
        x = np.random.default_rng(0).uniform(-1, 1, (6, 4))
        assert np.allclose(model.embed(x).value, x)

    def test_permutation_equivariance(self):
        model = tiny_model()
        rng = np.random.default_rng(1)
        x = rng.uniform(-1, 1, (7, 5))
        perm = rng.permutation(7)
        out = model.predict_score(model.embed(x)).value
        out_perm = model.predict_score(model.embed(x[perm])).value
        assert np.array_equal(out[perm], out_perm)

    def test_row_independence(self):
        # zeroing sample j leaves every other row's output untouched
        model = tiny_model()
        x = np.random.default_rng(2).uniform(-1, 1, (5, 5))
        base = model.predict_score(model.embed(x)).value
        masked = x.copy()
        masked[3] = 0.0
        out = model.predict_score(model.embed(masked)).value
        keep = [0, 1, 2, 4]
        assert np.array_equal(base[keep], out[keep])

    def test_width_mismatch_errors(self):
        model = tiny_model()
        with pytest.raises(ShapeMismatchError, match="embed expects width 5"):
            model.embed(np.ones((3, 4)))
        with pytest.raises(ShapeMismatchError, match="predict_score expects width 4"):
            model.predict_score(ad.constant(np.ones((3, 5))))
        with pytest.raises(ShapeMismatchError, match="classify_annotator expects width 4"):
            model.classify_annotator(ad.constant(np.ones((3, 5))))

    def test_classifier_rows_are_distributions(self):
        model = tiny_model(seed=5)
        x = np.random.default_rng(3).uniform(-2, 2, (9, 5))
        probs = model.classify_annotator(model.embed(x)).value
        assert np.all(probs > 0.0) and np.all(probs < 1.0)
        assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-12

    def test_zero_classifier_weights_give_uniform(self):
        model = tiny_model(annotators=4)
        for w, b in model.classifier_layers:
            w.assign(np.zeros_like(w.value))
        x = np.random.default_rng(4).uniform(-1, 1, (6, 5))
        probs = model.classify_annotator(model.embed(x)).value
        assert np.allclose(probs, 0.25)


class TestGradients:
    def test_embed_gradient_matches_finite_differences(self):
        model = tiny_model(seed=7)
        x = np.random.default_rng(5).uniform(-1, 1, (4, 5))
        build = lambda: ad.sum_all(model.embed(x))
        check_gradients(build, model.parameters("embedder"))

    def test_head_gradient_matches_finite_differences(self):
        model = tiny_model(seed=8)
        x = np.random.default_rng(6).uniform(-1, 1, (4, 5))
        build = lambda: ad.sum_all(model.predict_score(model.embed(x)))
        check_gradients(build, model.parameters("embedder") + model.parameters("head"))

    def test_classifier_cross_entropy_gradient(self):
        from dcr.losses import annotator_ce_loss

        model = tiny_model(seed=9)
        x = np.random.default_rng(7).uniform(-1, 1, (5, 5))
        ids = np.array([0, 1, 2, 0, 1])
        build = lambda: annotator_ce_loss(model.classify_annotator(model.embed(x)), ids)
        check_gradients(build, model.parameters("classifier"))


class TestCheckpoint:
    def test_round_trip_lossless(self, tmp_path):
        model = tiny_model(seed=11)
        # nudge params away from init so the test is not vacuous
        for _, node in model.named_parameters():
            node.assign(node.value + 0.1)
        path = tmp_path / "model.json"
        model.save(path)
        restored = DcrModel.load(path)
        for (na, pa), (nb, pb) in zip(model.named_parameters(), restored.named_parameters()):
            assert na == nb
            assert np.array_equal(pa.value, pb.value)
        assert restored.embedder_spec == model.embedder_spec

    def test_version_check(self, tmp_path):
        model = tiny_model()
        path = tmp_path / "model.json"
        model.save(path)
        blob = path.read_text().replace('"format_version": 1', '"format_version": 99')
        path.write_text(blob)
        with pytest.raises(ConfigError, match="version"):
            DcrModel.load(path)

    def test_default_specs_shapes(self):
        embedder, head, classifier = default_specs(16, 4)
        model = DcrModel(embedder, head, classifier, seed=0)
        assert model.embedding_dim == 32
        assert model.annotator_count == 4
