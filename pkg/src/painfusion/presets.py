"""Shipped default configurations.

The default synthetic dataset plants complementary signal: every
positive bout expresses either the limb coordinates or the sEMG
channels, never both, so no single modality sees all positives.
Limb expression also flips direction per subject, which keeps the
movement side predictive within a subject but useless to any model
that pools a mean shift across subjects. This is the setting under
which correlation-derived fusion weights should beat both the
single-model benchmark and plain averaging: the weights concentrate
on the modality whose evidence survives pooling, while a model on
the concatenated features pays for sixty-six distracting inputs.
"""

from .data import SyntheticConfig
from .evaluate import ExperimentConfig
from .models import ClassifierSpec
from .stats import STATISTICAL

DEFAULT_SEED = 7

WINDOW_LENGTH = 30
WINDOW_STRIDE = 15


def default_synthetic_config(seed: int = DEFAULT_SEED) -> SyntheticConfig:
    """Complementary-signal dataset sized so windowed sample counts and
    class imbalance are in the same regime as the real recordings."""
    return SyntheticConfig(
        n_subjects=12,
        frames_per_subject=12600,
        positive_rate=0.0596,
        modality_snr={"upper_limbs": 1.0, "lower_limbs": 1.0, "semg": 2.0},
        seed=seed,
        mean_positive_bout=60,
        expression="complementary",
        noise_correlation=0.3,
    )


def default_classifier_spec(seed: int = DEFAULT_SEED) -> ClassifierSpec:
    return ClassifierSpec(
        kind="logistic",
        seed=seed,
        learning_rate=0.05,
        epochs=30,
        batch_size=64,
        momentum=0.9,
        l2=1e-4,
    )


def default_experiment_config(seed: int = DEFAULT_SEED) -> ExperimentConfig:
    return ExperimentConfig(
        scheme_name="quadrifurcated",
        weighting=STATISTICAL,
        classifier=default_classifier_spec(seed),
        seed=seed,
        window_length=WINDOW_LENGTH,
        window_stride=WINDOW_STRIDE,
        positive_fraction_threshold=0.5,
        decision_threshold=0.5,
        vote_mode="soft",
        reduction="mean",
    )


def synthetic_split(n_subjects: int) -> tuple[list[str], list[str]]:
    """Deterministic train/valid assignment for generated subjects:
    subjects come in (chronic, healthy) pairs, and every third pair goes
    to validation, keeping both groups on both sides."""
    train, valid = [], []
    for i in range(n_subjects):
        name = f"S{i + 1:02d}"
        if (i // 2) % 3 == 2:
            valid.append(name)
        else:
            train.append(name)
    if not valid and train:
        valid.append(train.pop())
    return train, valid
