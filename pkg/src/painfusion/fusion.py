"""Decision-level fusion of per-modality classifier outputs.

Soft voting sums weight * probability over modalities and compares the
result against a decision threshold (ties go to the positive class).
Hard voting first thresholds each modality, then weighs the votes.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig, KeyMismatch, LengthMismatch, ProbabilityOutOfRange
from .stats import FusionWeights

VOTE_MODES = ("soft", "hard")


@dataclass(frozen=True)
class FusedPrediction:
    """One fused decision. ``fused_probability`` is the convex
    combination of the per-modality values (for hard voting, of their
    thresholded votes) and ``label`` is 1 exactly when it reaches the
    threshold."""

    per_modality: dict[str, float]
    fused_probability: float
    label: int
    threshold: float


def _check_threshold(threshold: float) -> None:
    if not (math.isfinite(threshold) and 0.0 < threshold < 1.0):
        raise InvalidConfig(f"threshold must lie strictly in (0, 1), got {threshold!r}")


def _check_mode(mode: str) -> None:
    if mode not in VOTE_MODES:
        raise InvalidConfig(f"mode must be one of {VOTE_MODES}, got {mode!r}")


def _check_keys(probas_keys, weights: FusionWeights) -> list[str]:
    got, want = set(probas_keys), set(weights.weights)
    if got != want:
        raise KeyMismatch(
            f"modalities {sorted(got)} do not match weight table {sorted(want)}"
        )
    return sorted(want)


def fuse(
    probas: dict[str, float],
    weights: FusionWeights,
    threshold: float = 0.5,
    mode: str = "soft",
) -> FusedPrediction:
    """Combine one probability per modality into a single decision.

    Accumulation runs in sorted key order, so the result is independent
    of the dict's insertion order.
    """
    _check_threshold(threshold)
    _check_mode(mode)
    names = _check_keys(probas.keys(), weights)
    for name in names:
        p = probas[name]
        if not (math.isfinite(p) and 0.0 <= p <= 1.0):
            raise ProbabilityOutOfRange(f"modality {name!r}: probability {p!r}")
    # Left-to-right accumulation in sorted key order: bit-identical to
    # fuse_batch and independent of dict insertion order.
    fused = 0.0
    for name in names:
        vote = probas[name] if mode == "soft" else (1.0 if probas[name] >= threshold else 0.0)
        fused += weights.weights[name] * vote
    return FusedPrediction(
        per_modality={name: float(probas[name]) for name in names},
        fused_probability=fused,
        label=1 if fused >= threshold else 0,
        threshold=threshold,
    )


def fuse_batch(
    probas: dict[str, np.ndarray],
    weights: FusionWeights,
    threshold: float = 0.5,
    mode: str = "soft",
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized fuse over aligned probability arrays; returns
    (fused_probabilities, labels) in input order."""
    _check_threshold(threshold)
    _check_mode(mode)
    names = _check_keys(probas.keys(), weights)
    lengths = {name: len(probas[name]) for name in names}
    if len(set(lengths.values())) > 1:
        raise LengthMismatch(f"modality arrays differ in length: {lengths}")
    n = lengths[names[0]]
    fused = np.zeros(n)
    for name in names:
        p = np.asarray(probas[name], dtype=np.float64)
        bad = ~(np.isfinite(p) & (p >= 0.0) & (p <= 1.0))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise ProbabilityOutOfRange(
                f"modality {name!r}, window {i}: probability {p[i]!r}"
            )
        votes = p if mode == "soft" else (p >= threshold).astype(np.float64)
        fused += weights.weights[name] * votes
    labels = (fused >= threshold).astype(np.int8)
    return fused, labels
