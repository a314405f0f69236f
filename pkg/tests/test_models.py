"""Classifier training, gradients, prediction, and checkpoints."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from painfusion import (
    ClassifierSpec,
    TrainedClassifier,
    Window,
    fit,
    grad_check,
    make_windows,
)
from painfusion.data import SyntheticConfig, generate_synthetic
from painfusion.models import load_checkpoint, save_checkpoint
from painfusion.errors import (
    CheckpointError,
    DivergedLoss,
    EmptyDataset,
    InvalidLabel,
    LengthMismatch,
    ShapeMismatch,
)
from painfusion.evaluate import confusion, metrics


def _separable(n=40, d=6, frames=5, seed=0, margin=2.0):
    """Windows whose pooled first feature sits at +/-margin by class."""
    rng = np.random.default_rng(seed)
    windows, labels = [], []
    for i in range(n):
        label = i % 2
        feats = 0.1 * rng.standard_normal((frames, d))
        feats[:, 0] += margin if label else -margin
        windows.append(Window(subject_id="S", features=feats, label=label))
        labels.append(label)
    return windows, labels


def _random_windows(n=16, d=6, frames=8, seed=1):
    rng = np.random.default_rng(seed)
    windows = [
        Window(subject_id="S", features=rng.standard_normal((frames, d)), label=int(i % 2))
        for i in range(n)
    ]
    return windows, [w.label for w in windows]


def _hand_built(params, d=4):
    return TrainedClassifier(
        spec=ClassifierSpec(kind="logistic", seed=0),
        n_features=d,
        feature_mean=np.zeros(d),
        feature_std=np.ones(d),
        params=np.asarray(params, dtype=np.float64),
        positive_weight=1.0,
        single_class=False,
    )


class TestFit:
    def test_separable_reaches_perfect_accuracy(self):
        windows, labels = _separable()
        spec = ClassifierSpec(kind="logistic", seed=0, learning_rate=0.5, epochs=60, batch_size=16)
        assert spec.epochs <= 200
        model = fit(windows, labels, spec)
        predicted = (model.predict_proba_windows(windows) >= 0.5).astype(int)
        assert (predicted == np.asarray(labels)).all()

    def test_single_class_flag(self):
        windows, _ = _random_windows(n=20)
        model = fit(windows, [0] * 20, ClassifierSpec(kind="logistic", seed=0, epochs=20))
        assert model.single_class
        assert model.positive_weight == 1.0
        assert (model.predict_proba_windows(windows) < 0.5).all()

    def test_empty_and_mismatched_inputs(self):
        spec = ClassifierSpec(kind="logistic", seed=0)
        with pytest.raises(EmptyDataset):
            fit([], [], spec)
        windows, labels = _random_windows(n=4)
        with pytest.raises(LengthMismatch):
            fit(windows, labels[:3], spec)
        with pytest.raises(InvalidLabel):
            fit(windows, [0, 1, 2, 1], spec)

    def test_inconsistent_feature_width(self):
        windows, labels = _random_windows(n=4, d=6)
        bad = Window(subject_id="S", features=np.zeros((8, 5)), label=0)
        with pytest.raises(ShapeMismatch, match="window 4"):
            fit(windows + [bad], labels + [0], ClassifierSpec(kind="logistic", seed=0))

    def test_huge_learning_rate_diverges(self):
        windows, labels = _separable()
        spec = ClassifierSpec(
            kind="logistic", seed=0, learning_rate=1e8, epochs=40, batch_size=8
        )
        with np.errstate(over="ignore"), pytest.raises(DivergedLoss):
            fit(windows, labels, spec)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=10, deadline=None)
    def test_fit_is_deterministic(self, seed):
        windows, labels = _random_windows()
        spec = ClassifierSpec(kind="mlp", seed=seed, epochs=3, hidden_units=4)
        a = fit(windows, labels, spec)
        b = fit(windows, labels, spec)
        assert a.params.tobytes() == b.params.tobytes()
        assert a.training_log == b.training_log


class TestPredict:
    def test_zero_parameters_give_half(self):
        model = _hand_built(np.zeros(5))
        window = Window(subject_id="S", features=np.ones((3, 4)), label=0)
        assert model.predict_proba(window) == 0.5

    def test_hand_set_weight_matches_sigmoid(self):
        model = _hand_built([1.0, 0.0, 0.0, 0.0, 0.0])
        feats = np.zeros((4, 4))
        feats[:, 0] = 2.0
        window = Window(subject_id="S", features=feats, label=1)
        assert model.predict_proba(window) == 1.0 / (1.0 + math.exp(-2.0))

    def test_repeated_prediction_is_identical(self):
        windows, labels = _random_windows()
        model = fit(windows, labels, ClassifierSpec(kind="cnn1d", seed=2, epochs=4))
        first = model.predict_proba_windows(windows)
        second = model.predict_proba_windows(windows)
        assert first.tobytes() == second.tobytes()

    def test_conv_needs_equal_window_lengths(self):
        windows, labels = _random_windows(frames=8)
        model = fit(windows, labels, ClassifierSpec(kind="cnn1d", seed=0, epochs=2))
        odd = Window(subject_id="S", features=np.zeros((9, 6)), label=0)
        with pytest.raises(ShapeMismatch):
            model.predict_proba_windows([windows[0], odd])

    def test_empty_batch(self):
        model = _hand_built(np.zeros(5))
        assert model.predict_proba_windows([]).shape == (0,)


class TestGradients:
    """Quick one-seed gradient checks; the acceptance suite sweeps 20
    seeds per architecture at the same tolerances."""

    def test_logistic(self):
        windows, labels = _random_windows(seed=5)
        err = grad_check(ClassifierSpec(kind="logistic", seed=5), windows, labels)
        assert err < 1e-7

    def test_mlp(self):
        windows, labels = _random_windows(seed=6)
        err = grad_check(ClassifierSpec(kind="mlp", seed=6, hidden_units=8), windows, labels)
        assert err < 1e-6

    def test_cnn1d(self):
        # Windows need enough frames that max pooling has comfortably
        # separated activations; 8-frame windows exhaust the redraws.
        windows, labels = _random_windows(seed=7, frames=12)
        err = grad_check(ClassifierSpec(kind="cnn1d", seed=7), windows, labels)
        assert err < 1e-5


class TestConvRegression:
    def test_cnn1d_learns_bout_structure(self):
        """Frozen regression floor for the convolutional model on a
        bout-structured corpus. Measured 0.932 when the floor was set;
        anything under 0.6 means the temporal path broke."""
        config = SyntheticConfig(
            n_subjects=6,
            frames_per_subject=3000,
            positive_rate=0.15,
            modality_snr={"coords": 1.0},
            seed=0,
            mean_positive_bout=60,
        )
        seqs = generate_synthetic(config)
        train = [w for s in seqs[:4] for w in make_windows(s, 30, 15)]
        valid = [w for s in seqs[4:] for w in make_windows(s, 30, 15)]
        spec = ClassifierSpec(
            kind="cnn1d", seed=0, learning_rate=0.02, epochs=20, batch_size=64
        )
        model = fit(train, [w.label for w in train], spec)
        predicted = (model.predict_proba_windows(valid) >= 0.5).astype(int)
        report = metrics(confusion(predicted, [w.label for w in valid]))
        assert report.f1_pos >= 0.6


class TestCheckpoints:
    def test_round_trip_is_bit_identical(self, tmp_path):
        windows, labels = _random_windows()
        model = fit(windows, labels, ClassifierSpec(kind="mlp", seed=3, epochs=5))
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        assert loaded.spec == model.spec
        assert loaded.params.tobytes() == model.params.tobytes()
        assert loaded.single_class == model.single_class
        assert loaded.training_log == model.training_log
        before = model.predict_proba_windows(windows)
        after = loaded.predict_proba_windows(windows)
        assert before.tobytes() == after.tobytes()

    def test_unsupported_header(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_text("some-other-format 9\n")
        with pytest.raises(CheckpointError, match="header"):
            load_checkpoint(path)

    def test_missing_field(self, tmp_path):
        windows, labels = _random_windows()
        model = fit(windows, labels, ClassifierSpec(kind="logistic", seed=0, epochs=2))
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        lines = [l for l in path.read_text().splitlines() if not l.startswith("params:")]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CheckpointError, match="params"):
            load_checkpoint(path)

    def test_vector_length_mismatch(self, tmp_path):
        windows, labels = _random_windows()
        model = fit(windows, labels, ClassifierSpec(kind="logistic", seed=0, epochs=2))
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        lines = path.read_text().splitlines()
        for i, line in enumerate(lines):
            if line.startswith("feature_mean:"):
                lines[i] = "feature_mean: 0.0 1.0"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CheckpointError, match="n_features"):
            load_checkpoint(path)
