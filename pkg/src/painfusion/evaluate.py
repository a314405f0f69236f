"""Experiment orchestration: confusion-matrix metrics, train/valid
evaluation of one fused configuration, the four-arm comparison matrix,
and leave-one-subject-out cross validation.

Class 1 (protective behavior present) is the positive class throughout.
Ratios with an empty denominator are reported as 0.0 and flagged, never
raised, so heavily imbalanced splits still produce a full report.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import SequenceData, Window, _stable_key, make_windows
from .errors import (
    EmptyDataset,
    InvalidConfig,
    InvalidLabel,
    LengthMismatch,
    PainFusionError,
    SubjectInBothSplits,
    TooFewSubjects,
)
from .fusion import VOTE_MODES, fuse_batch
from .modality import JointSegmentMap, SCHEME_NAMES, project, scheme_by_name
from .models import ClassifierSpec, TrainedClassifier, fit
from .stats import (
    AVERAGE,
    REDUCTIONS,
    STATISTICAL,
    FusionWeights,
    average_weights,
    modality_weights,
)

WEIGHTINGS = (STATISTICAL, AVERAGE)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )


def confusion(predicted, truth) -> ConfusionMatrix:
    p = np.asarray(predicted)
    t = np.asarray(truth)
    if len(t) != len(p):
        raise LengthMismatch(f"{len(p)} predictions vs {len(t)} true labels")
    if len(t) == 0:
        raise EmptyDataset("cannot build a confusion matrix from zero examples")
    for name, arr in (("predicted", p), ("true", t)):
        if not np.isin(arr, (0, 1)).all():
            raise InvalidLabel(f"{name} labels must be 0 or 1")
    p = p.astype(np.int64)
    t = t.astype(np.int64)
    return ConfusionMatrix(
        tp=int(((t == 1) & (p == 1)).sum()),
        fp=int(((t == 0) & (p == 1)).sum()),
        fn=int(((t == 1) & (p == 0)).sum()),
        tn=int(((t == 0) & (p == 0)).sum()),
    )


@dataclass(frozen=True)
class MetricSet:
    """Positive-class and macro-averaged metrics for one confusion
    matrix. ``degenerate`` is set when any ratio hit 0/0 and was
    reported as 0.0."""

    accuracy: float
    precision_pos: float
    recall_pos: float
    f1_pos: float
    precision_neg: float
    recall_neg: float
    f1_neg: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    degenerate: bool


def _ratio(num: int, den: int, flags: list) -> float:
    if den == 0:
        flags.append(True)
        return 0.0
    return num / den


def _f1(precision: float, recall: float, flags: list) -> float:
    if precision + recall == 0.0:
        flags.append(True)
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def metrics(cm: ConfusionMatrix) -> MetricSet:
    flags: list = []
    precision_pos = _ratio(cm.tp, cm.tp + cm.fp, flags)
    recall_pos = _ratio(cm.tp, cm.tp + cm.fn, flags)
    precision_neg = _ratio(cm.tn, cm.tn + cm.fn, flags)
    recall_neg = _ratio(cm.tn, cm.tn + cm.fp, flags)
    f1_pos = _f1(precision_pos, recall_pos, flags)
    f1_neg = _f1(precision_neg, recall_neg, flags)
    return MetricSet(
        accuracy=(cm.tp + cm.tn) / cm.total,
        precision_pos=precision_pos,
        recall_pos=recall_pos,
        f1_pos=f1_pos,
        precision_neg=precision_neg,
        recall_neg=recall_neg,
        f1_neg=f1_neg,
        precision_macro=(precision_pos + precision_neg) / 2.0,
        recall_macro=(recall_pos + recall_neg) / 2.0,
        f1_macro=(f1_pos + f1_neg) / 2.0,
        degenerate=bool(flags),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """One fused run: a modality scheme, a weighting rule, one classifier
    spec applied identically to every modality (each modality's training
    stream is derived from the classifier seed and the modality name),
    and the windowing plus decision settings."""

    scheme_name: str
    weighting: str
    classifier: ClassifierSpec
    seed: int
    window_length: int = 180
    window_stride: int = 45
    positive_fraction_threshold: float = 0.5
    decision_threshold: float = 0.5
    vote_mode: str = "soft"
    reduction: str = "mean"
    joint_map: JointSegmentMap | None = None

    def validate(self) -> None:
        if self.scheme_name not in SCHEME_NAMES:
            raise InvalidConfig(
                f"scheme_name must be one of {SCHEME_NAMES}, got {self.scheme_name!r}"
            )
        if self.weighting not in WEIGHTINGS:
            raise InvalidConfig(
                f"weighting must be one of {WEIGHTINGS}, got {self.weighting!r}"
            )
        if self.vote_mode not in VOTE_MODES:
            raise InvalidConfig(f"vote_mode must be one of {VOTE_MODES}, got {self.vote_mode!r}")
        if self.reduction not in REDUCTIONS:
            raise InvalidConfig(f"reduction must be one of {REDUCTIONS}, got {self.reduction!r}")
        if self.seed < 0:
            raise InvalidConfig("seed must be a nonnegative integer")
        self.classifier.validate()


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    weights: FusionWeights
    classifiers: dict[str, TrainedClassifier]
    n_train_windows: int
    valid_subjects: tuple[str, ...]
    valid_labels: np.ndarray
    per_modality_probas: dict[str, np.ndarray]
    fused_probabilities: np.ndarray
    predicted: np.ndarray
    confusion_matrix: ConfusionMatrix
    metric_set: MetricSet


def derive_seed(base_seed: int, label: str) -> int:
    """A reproducible child seed from (base_seed, label); used to give
    every modality and every cross-validation fold its own stream."""
    key = np.random.SeedSequence([base_seed, _stable_key(label)])
    return int(key.generate_state(1, dtype=np.uint64)[0])


def collect_windows(sequences, config: ExperimentConfig):
    """All windows from the sequences under the config's window rule,
    plus the window label vector."""
    windows: list[Window] = []
    for seq in sequences:
        windows.extend(
            make_windows(
                seq,
                config.window_length,
                config.window_stride,
                config.positive_fraction_threshold,
            )
        )
    labels = np.array([w.label for w in windows], dtype=np.int8)
    return windows, labels


def _map_indexed(fn, items, threads: int):
    """Apply fn over items, possibly on a thread pool, always returning
    results in input order so parallelism cannot reorder anything."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _stage(name: str, fn):
    try:
        return fn()
    except PainFusionError as exc:
        raise type(exc)(f"{name}: {exc}") from exc


def run_experiment(
    train_seqs: list[SequenceData],
    valid_seqs: list[SequenceData],
    config: ExperimentConfig,
    threads: int = 1,
) -> ExperimentResult:
    """Train per-modality classifiers on the train split, fuse their
    validation probabilities, and score the result.

    Fusion weights and standardization constants come from the train
    split only; the validation split is only ever scored. Errors from
    the pipeline are re-raised with the failing stage prefixed.
    """
    config.validate()
    shared = {s.subject_id for s in train_seqs} & {s.subject_id for s in valid_seqs}
    if shared:
        raise SubjectInBothSplits(f"subject(s) in both splits: {sorted(shared)}")
    scheme = scheme_by_name(config.scheme_name, config.joint_map)
    train_windows, train_labels = _stage("windowing", lambda: collect_windows(train_seqs, config))
    valid_windows, valid_labels = _stage("windowing", lambda: collect_windows(valid_seqs, config))
    if not train_windows:
        raise EmptyDataset("windowing: train split produced no windows")
    if not valid_windows:
        raise EmptyDataset("windowing: validation split produced no windows")

    if config.weighting == STATISTICAL:
        weights = _stage(
            "weighting",
            lambda: modality_weights(train_windows, train_labels, scheme, config.reduction),
        )
    else:
        weights = average_weights(scheme)

    names = sorted(scheme.names)

    def train_one(name: str):
        spec = replace(config.classifier, seed=derive_seed(config.classifier.seed, "clf:" + name))
        projected_train = [
            Window(w.subject_id, project(w, scheme, name), w.label) for w in train_windows
        ]
        model = fit(projected_train, train_labels, spec)
        projected_valid = [
            Window(w.subject_id, project(w, scheme, name), w.label) for w in valid_windows
        ]
        return model, model.predict_proba_windows(projected_valid)

    outcomes = _stage("training", lambda: _map_indexed(train_one, names, threads))
    classifiers = {name: model for name, (model, _) in zip(names, outcomes)}
    probas = {name: p for name, (_, p) in zip(names, outcomes)}

    fused, predicted = _stage(
        "fusion",
        lambda: fuse_batch(probas, weights, config.decision_threshold, config.vote_mode),
    )
    cm = _stage("scoring", lambda: confusion(predicted, valid_labels))
    return ExperimentResult(
        config=config,
        weights=weights,
        classifiers=classifiers,
        n_train_windows=len(train_windows),
        valid_subjects=tuple(w.subject_id for w in valid_windows),
        valid_labels=valid_labels.astype(np.int64),
        per_modality_probas=probas,
        fused_probabilities=fused,
        predicted=predicted.astype(np.int64),
        confusion_matrix=cm,
        metric_set=metrics(cm),
    )


MATRIX_ARMS = (
    ("singular", "singular", STATISTICAL),
    ("bifurcated_statistical", "bifurcated", STATISTICAL),
    ("quadrifurcated_statistical", "quadrifurcated", STATISTICAL),
    ("quadrifurcated_average", "quadrifurcated", AVERAGE),
)


def run_matrix(
    train_seqs: list[SequenceData],
    valid_seqs: list[SequenceData],
    base: ExperimentConfig,
    threads: int = 1,
) -> list[tuple[str, ExperimentResult]]:
    """Run the four standard arms (one scheme/weighting pair each) with
    shared windowing, classifier, and seed settings. Arms sharing a
    scheme train identical models, so weighting is the only difference
    between the two quadrifurcated rows."""
    results = []
    for arm_name, scheme_name, weighting in MATRIX_ARMS:
        config = replace(base, scheme_name=scheme_name, weighting=weighting)
        results.append((arm_name, run_experiment(train_seqs, valid_seqs, config, threads)))
    return results


@dataclass(frozen=True)
class FoldResult:
    fold_id: str
    result: ExperimentResult


@dataclass(frozen=True)
class LoocvResult:
    config: ExperimentConfig
    granularity: str
    folds: tuple[FoldResult, ...]
    pooled_confusion: ConfusionMatrix
    pooled_metrics: MetricSet


GRANULARITIES = ("subject", "sequence")


def loocv(
    sequences: list[SequenceData],
    config: ExperimentConfig,
    granularity: str = "subject",
    threads: int = 1,
) -> LoocvResult:
    """Leave-one-out cross validation, by subject (default) or by
    individual sequence. Weights, standardization, and classifier
    training are redone inside every fold from that fold's train part;
    each fold's classifier seed is derived from (config.seed, fold id).
    """
    if granularity not in GRANULARITIES:
        raise InvalidConfig(
            f"granularity must be one of {GRANULARITIES}, got {granularity!r}"
        )
    config.validate()
    if granularity == "subject":
        keys = sorted({s.subject_id for s in sequences})
        held_out = {k: [s for s in sequences if s.subject_id == k] for k in keys}
    else:
        keys = [f"{s.subject_id}#{i}" for i, s in enumerate(sequences)]
        held_out = {k: [sequences[i]] for i, k in enumerate(keys)}
    if len(keys) < 2:
        raise TooFewSubjects(f"cross validation needs at least 2 folds, got {len(keys)}")

    def run_fold(key: str) -> FoldResult:
        valid = held_out[key]
        valid_ids = {id(s) for s in valid}
        train = [s for s in sequences if id(s) not in valid_ids]
        fold_spec = replace(
            config.classifier, seed=derive_seed(config.seed, "fold:" + key)
        )
        fold_config = replace(config, classifier=fold_spec)
        return FoldResult(key, run_experiment(train, valid, fold_config, threads=1))

    folds = _map_indexed(run_fold, keys, threads)
    pooled = folds[0].result.confusion_matrix
    for fold in folds[1:]:
        pooled = pooled + fold.result.confusion_matrix
    return LoocvResult(
        config=config,
        granularity=granularity,
        folds=tuple(folds),
        pooled_confusion=pooled,
        pooled_metrics=metrics(pooled),
    )


# --- report rendering -----------------------------------------------------

METRIC_COLUMNS = (
    "scheme",
    "weighting",
    "classifier",
    "acc",
    "prec_pos",
    "rec_pos",
    "f1_pos",
    "prec_macro",
    "rec_macro",
    "f1_macro",
)


def _metric_row(name: str, config: ExperimentConfig, ms: MetricSet) -> str:
    values = (
        ms.accuracy,
        ms.precision_pos,
        ms.recall_pos,
        ms.f1_pos,
        ms.precision_macro,
        ms.recall_macro,
        ms.f1_macro,
    )
    fields = [name, config.scheme_name, config.weighting, config.classifier.kind]
    fields.extend(repr(v) for v in values)
    return ",".join(fields)


def metrics_csv(rows: list[tuple[str, ExperimentConfig, MetricSet]]) -> str:
    """Machine CSV, one row per arm/fold; floats keep full precision."""
    out = ["name," + ",".join(METRIC_COLUMNS)]
    for name, config, ms in rows:
        out.append(_metric_row(name, config, ms))
    return "\n".join(out) + "\n"


def confusion_csv(rows: list[tuple[str, ConfusionMatrix, MetricSet]]) -> str:
    out = ["name,tp,fp,fn,tn,total,degenerate"]
    for name, cm, ms in rows:
        out.append(
            f"{name},{cm.tp},{cm.fp},{cm.fn},{cm.tn},{cm.total},{int(ms.degenerate)}"
        )
    return "\n".join(out) + "\n"


def metrics_table(rows: list[tuple[str, ConfusionMatrix, MetricSet]]) -> str:
    """Human-oriented fixed-width summary table."""
    header = (
        f"{'name':<28} {'acc':>7} {'prec+':>7} {'rec+':>7} {'f1+':>7} "
        f"{'f1macro':>8} {'tp':>6} {'fp':>6} {'fn':>6} {'tn':>6}"
    )
    lines = [header, "-" * len(header)]
    for name, cm, ms in rows:
        lines.append(
            f"{name:<28} {ms.accuracy:>7.4f} {ms.precision_pos:>7.4f} {ms.recall_pos:>7.4f} "
            f"{ms.f1_pos:>7.4f} {ms.f1_macro:>8.4f} {cm.tp:>6} {cm.fp:>6} {cm.fn:>6} {cm.tn:>6}"
        )
    return "\n".join(lines) + "\n"


def predictions_csv(result: ExperimentResult) -> str:
    """Per-window fused decisions: window_index, subject, per-modality
    probabilities in sorted key order, fused value, label, truth."""
    names = sorted(result.per_modality_probas)
    header = ["window_index", "subject_id"]
    header.extend("proba_" + n for n in names)
    header.extend(["fused_probability", "label", "true_label"])
    lines = [",".join(header)]
    for i in range(len(result.valid_labels)):
        row = [str(i), result.valid_subjects[i]]
        row.extend(repr(float(result.per_modality_probas[n][i])) for n in names)
        row.extend(
            [
                repr(float(result.fused_probabilities[i])),
                str(int(result.predicted[i])),
                str(int(result.valid_labels[i])),
            ]
        )
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def weights_csv(weights: FusionWeights) -> str:
    lines = [f"# scheme={weights.scheme_name} provenance={weights.provenance}"]
    lines.append("modality,weight,raw_relevance")
    for name in sorted(weights.weights):
        lines.append(
            f"{name},{repr(weights.weights[name])},{repr(weights.raw_relevance[name])}"
        )
    return "\n".join(lines) + "\n"
