"""Small binary classifiers trained with class-weighted cross entropy.

Three architectures over a [window_length x 70] feature window:

* ``logistic``: time-mean pooling, then a single linear unit.
* ``mlp``: time-mean pooling, one ReLU hidden layer, linear output.
* ``cnn1d``: temporal convolution (stride 1), ReLU, global max pooling
  over time, linear output.

All parameters live in one flat float64 vector per model (layouts are
documented on the architecture classes), gradients are hand-derived,
and optimization is plain mini-batch SGD with optional momentum. Every
random draw goes through ``numpy.random.SeedSequence`` so that training
is a pure function of (windows, labels, spec).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CheckpointError,
    DivergedLoss,
    EmptyDataset,
    InvalidConfig,
    InvalidLabel,
    LengthMismatch,
    NonFiniteGradient,
    ShapeMismatch,
)

CLASSIFIER_KINDS = ("logistic", "mlp", "cnn1d")

STD_FLOOR = 1e-8

_CHECKPOINT_HEADER = "painfusion-classifier 1"


@dataclass(frozen=True)
class ClassifierSpec:
    """Architecture and training hyperparameters.

    ``positive_class_weight`` of None means "balance the classes":
    the weight on positive terms becomes n_negative / n_positive,
    computed from the training labels.
    """

    kind: str
    seed: int
    hidden_units: int = 16
    conv_channels: int = 8
    kernel_width: int = 5
    learning_rate: float = 0.05
    epochs: int = 40
    batch_size: int = 32
    momentum: float = 0.9
    l2: float = 1e-4
    positive_class_weight: float | None = None

    def validate(self) -> None:
        if self.kind not in CLASSIFIER_KINDS:
            raise InvalidConfig(f"kind must be one of {CLASSIFIER_KINDS}, got {self.kind!r}")
        if self.seed < 0:
            raise InvalidConfig("seed must be a nonnegative integer")
        for name in ("hidden_units", "conv_channels", "kernel_width", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise InvalidConfig(f"{name} must be >= 1")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise InvalidConfig("learning_rate must be finite and positive")
        if not (0.0 <= self.momentum < 1.0):
            raise InvalidConfig("momentum must lie in [0, 1)")
        if not (math.isfinite(self.l2) and self.l2 >= 0):
            raise InvalidConfig("l2 must be finite and nonnegative")
        if self.positive_class_weight is not None and not (
            math.isfinite(self.positive_class_weight) and self.positive_class_weight > 0
        ):
            raise InvalidConfig("positive_class_weight must be finite and positive")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _weighted_bce(z, y, pos_weight):
    # softplus(-z) = -log(sigmoid(z)); both branches via logaddexp stay
    # finite for any z.
    per_example = pos_weight * y * np.logaddexp(0.0, -z) + (1.0 - y) * np.logaddexp(0.0, z)
    return float(np.mean(per_example))


def _bce_dz(z, y, pos_weight):
    s = _sigmoid(z)
    return (pos_weight * y * (s - 1.0) + (1.0 - y) * s) / len(z)


def _he_uniform(rng, fan_in: int, size: int) -> np.ndarray:
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size)


class _Logistic:
    """Flat layout: [w: d][b: 1]."""

    pooled = True

    def __init__(self, spec: ClassifierSpec, n_features: int):
        self.d = n_features
        self.n_params = n_features + 1

    def init(self, rng) -> np.ndarray:
        params = np.zeros(self.n_params)
        params[: self.d] = _he_uniform(rng, self.d, self.d)
        return params

    def raw_scores(self, params, X):
        w, b = params[: self.d], params[self.d]
        return X @ w + b, None

    def backward(self, params, X, cache, dz):
        grad = np.empty_like(params)
        grad[: self.d] = X.T @ dz
        grad[self.d] = dz.sum()
        return grad


class _Mlp:
    """Flat layout: [W1: d*h, row-major][b1: h][w2: h][b2: 1]."""

    pooled = True

    def __init__(self, spec: ClassifierSpec, n_features: int):
        self.d, self.h = n_features, spec.hidden_units
        self.n_params = self.d * self.h + self.h + self.h + 1

    def _unpack(self, params):
        d, h = self.d, self.h
        W1 = params[: d * h].reshape(d, h)
        b1 = params[d * h : d * h + h]
        w2 = params[d * h + h : d * h + 2 * h]
        b2 = params[-1]
        return W1, b1, w2, b2

    def init(self, rng) -> np.ndarray:
        d, h = self.d, self.h
        params = np.zeros(self.n_params)
        params[: d * h] = _he_uniform(rng, d, d * h)
        params[d * h + h : d * h + 2 * h] = _he_uniform(rng, h, h)
        return params

    def raw_scores(self, params, X):
        W1, b1, w2, b2 = self._unpack(params)
        pre = X @ W1 + b1
        hidden = np.maximum(pre, 0.0)
        return hidden @ w2 + b2, (pre, hidden)

    def backward(self, params, X, cache, dz):
        pre, hidden = cache
        _, _, w2, _ = self._unpack(params)
        d, h = self.d, self.h
        dpre = np.outer(dz, w2) * (pre > 0.0)
        grad = np.empty_like(params)
        grad[: d * h] = (X.T @ dpre).reshape(-1)
        grad[d * h : d * h + h] = dpre.sum(axis=0)
        grad[d * h + h : d * h + 2 * h] = hidden.T @ dz
        grad[-1] = dz.sum()
        return grad


class _Cnn1d:
    """Flat layout: [W: C*K*d, (channel, tap, feature) order][b_conv: C]
    [w: C][b: 1]. The convolution slides over time with stride 1, so a
    window of T frames yields T - K + 1 activations per channel before
    the global max pool."""

    pooled = False

    def __init__(self, spec: ClassifierSpec, n_features: int):
        self.d = n_features
        self.C, self.K = spec.conv_channels, spec.kernel_width
        self.n_params = self.C * self.K * self.d + self.C + self.C + 1

    def _unpack(self, params):
        C, K, d = self.C, self.K, self.d
        W = params[: C * K * d].reshape(C, K, d)
        b_conv = params[C * K * d : C * K * d + C]
        w = params[C * K * d + C : C * K * d + 2 * C]
        b = params[-1]
        return W, b_conv, w, b

    def init(self, rng) -> np.ndarray:
        C, K, d = self.C, self.K, self.d
        params = np.zeros(self.n_params)
        params[: C * K * d] = _he_uniform(rng, K * d, C * K * d)
        params[C * K * d + C : C * K * d + 2 * C] = _he_uniform(rng, C, C)
        return params

    def _taps(self, X):
        T = X.shape[1]
        if T < self.K:
            raise ShapeMismatch(f"window length {T} shorter than kernel width {self.K}")
        span = T - self.K + 1
        return np.stack([X[:, k : k + span, :] for k in range(self.K)], axis=2)

    def raw_scores(self, params, X):
        W, b_conv, w, b = self._unpack(params)
        taps = self._taps(X)
        act = np.einsum("btkj,ckj->btc", taps, W) + b_conv
        relu = np.maximum(act, 0.0)
        peak_at = relu.argmax(axis=1)
        pooled = np.take_along_axis(relu, peak_at[:, None, :], axis=1)[:, 0, :]
        return pooled @ w + b, (taps, act, relu, peak_at, pooled)

    def backward(self, params, X, cache, dz):
        taps, act, relu, peak_at, pooled = cache
        _, _, w, _ = self._unpack(params)
        C, K, d = self.C, self.K, self.d
        dpooled = np.outer(dz, w)
        drelu = np.zeros_like(relu)
        np.put_along_axis(drelu, peak_at[:, None, :], dpooled[:, None, :], axis=1)
        dact = drelu * (act > 0.0)
        grad = np.empty_like(params)
        grad[: C * K * d] = np.einsum("btc,btkj->ckj", dact, taps).reshape(-1)
        grad[C * K * d : C * K * d + C] = dact.sum(axis=(0, 1))
        grad[C * K * d + C : C * K * d + 2 * C] = pooled.T @ dz
        grad[-1] = dz.sum()
        return grad

    def pool_margin(self, cache) -> float:
        """Smallest gap between the winning and runner-up max-pool
        activation over all (example, channel) pairs; infinity when a
        window yields a single temporal position."""
        relu = cache[2]
        if relu.shape[1] < 2:
            return math.inf
        top2 = np.partition(relu, -2, axis=1)[:, -2:, :]
        return float(np.min(top2[:, 1, :] - top2[:, 0, :]))


def _architecture(spec: ClassifierSpec, n_features: int):
    if spec.kind == "logistic":
        return _Logistic(spec, n_features)
    if spec.kind == "mlp":
        return _Mlp(spec, n_features)
    return _Cnn1d(spec, n_features)


def _loss_and_grad(arch, params, X, y, pos_weight, l2):
    z, cache = arch.raw_scores(params, X)
    loss = _weighted_bce(z, y, pos_weight) + l2 * float(params @ params)
    grad = arch.backward(params, X, cache, _bce_dz(z, y, pos_weight))
    grad += 2.0 * l2 * params
    return loss, grad


def _check_training_inputs(windows, labels):
    if len(windows) == 0:
        raise EmptyDataset("no training windows")
    if len(windows) != len(labels):
        raise LengthMismatch(f"{len(windows)} windows vs {len(labels)} labels")
    y = np.asarray(labels, dtype=np.float64)
    if not np.isin(y, (0.0, 1.0)).all():
        raise InvalidLabel("training labels must be 0 or 1")
    d = windows[0].features.shape[1]
    for i, w in enumerate(windows):
        if w.features.ndim != 2 or w.features.shape[1] != d:
            raise ShapeMismatch(f"window {i}: shape {w.features.shape}, expected [*, {d}]")
    return y, d


def frame_statistics(windows) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and std over every frame of every window, with
    the std floored at STD_FLOOR to keep constant features harmless."""
    frames = np.concatenate([w.features for w in windows], axis=0)
    mean = frames.mean(axis=0)
    std = np.maximum(frames.std(axis=0), STD_FLOOR)
    return mean, std


def _prepare(arch, windows, mean, std):
    if arch.pooled:
        pooled = np.stack([w.features.mean(axis=0) for w in windows])
        return (pooled - mean) / std
    lengths = {w.features.shape[0] for w in windows}
    if len(lengths) > 1:
        raise ShapeMismatch(f"convolutional batches need equal window lengths, got {sorted(lengths)}")
    stacked = np.stack([w.features for w in windows])
    return (stacked - mean) / std


def resolve_positive_weight(spec: ClassifierSpec, y: np.ndarray) -> tuple[float, bool]:
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    single_class = n_pos == 0 or n_neg == 0
    if spec.positive_class_weight is not None:
        return float(spec.positive_class_weight), single_class
    if single_class:
        return 1.0, True
    return n_neg / n_pos, False


@dataclass(frozen=True)
class TrainedClassifier:
    """A fitted model: spec, standardization constants, flat parameters,
    and the per-epoch training losses. ``single_class`` records that the
    training set contained only one label value."""

    spec: ClassifierSpec
    n_features: int
    feature_mean: np.ndarray
    feature_std: np.ndarray
    params: np.ndarray
    positive_weight: float
    single_class: bool
    training_log: tuple[float, ...] = field(repr=False, default=())

    def _arch(self):
        return _architecture(self.spec, self.n_features)

    def predict_proba_windows(self, windows) -> np.ndarray:
        """Probability of the positive class for each window."""
        if len(windows) == 0:
            return np.zeros(0)
        arch = self._arch()
        X = _prepare(arch, windows, self.feature_mean, self.feature_std)
        z, _ = arch.raw_scores(self.params, X)
        return _sigmoid(z)

    def predict_proba(self, window) -> float:
        return float(self.predict_proba_windows([window])[0])


def fit(windows, labels, spec: ClassifierSpec) -> TrainedClassifier:
    """Train a classifier with mini-batch SGD.

    Standardization constants come from the training windows only.
    Positive examples are up-weighted in the loss (see ClassifierSpec).
    Raises DivergedLoss or NonFiniteGradient when optimization leaves
    the finite range; a single-label training set only sets a flag.
    """
    spec.validate()
    y, d = _check_training_inputs(windows, labels)
    mean, std = frame_statistics(windows)
    arch = _architecture(spec, d)
    X = _prepare(arch, windows, mean, std)
    pos_weight, single_class = resolve_positive_weight(spec, y)

    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    params = arch.init(rng)
    velocity = np.zeros_like(params)
    n = len(windows)
    log = []
    for epoch in range(spec.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, spec.batch_size):
            batch = order[start : start + spec.batch_size]
            loss, grad = _loss_and_grad(arch, params, X[batch], y[batch], pos_weight, spec.l2)
            if not math.isfinite(loss):
                raise DivergedLoss(f"epoch {epoch}: loss became {loss!r}")
            if not np.isfinite(grad).all():
                raise NonFiniteGradient(f"epoch {epoch}: gradient left the finite range")
            velocity = spec.momentum * velocity - spec.learning_rate * grad
            params = params + velocity
            total += loss * len(batch)
        log.append(total / n)

    return TrainedClassifier(
        spec=spec,
        n_features=d,
        feature_mean=mean,
        feature_std=std,
        params=params,
        positive_weight=pos_weight,
        single_class=single_class,
        training_log=tuple(log),
    )


_POOL_MARGIN = 1e-3
_MAX_REDRAWS = 32


def grad_check(spec: ClassifierSpec, windows, labels, epsilon: float = 1e-5) -> float:
    """Compare the analytic gradient against central finite differences
    at a freshly initialized parameter vector; returns the worst relative
    error max|ga - gn| / max(|ga| + |gn|, 1e-8) over all parameters.

    For the max-pooling architecture, draws where some channel's top two
    pooled activations nearly tie are rejected and redrawn, since there
    the finite difference straddles a kink.
    """
    spec.validate()
    y, d = _check_training_inputs(windows, labels)
    mean, std = frame_statistics(windows)
    arch = _architecture(spec, d)
    X = _prepare(arch, windows, mean, std)
    pos_weight, _ = resolve_positive_weight(spec, y)

    root = np.random.SeedSequence(spec.seed)
    params = None
    for child in root.spawn(_MAX_REDRAWS):
        candidate = arch.init(np.random.default_rng(child))
        if not hasattr(arch, "pool_margin"):
            params = candidate
            break
        _, cache = arch.raw_scores(candidate, X)
        if arch.pool_margin(cache) > _POOL_MARGIN:
            params = candidate
            break
    if params is None:
        raise NonFiniteGradient("could not find a max-pool-stable initialization")

    _, analytic = _loss_and_grad(arch, params, X, y, pos_weight, spec.l2)
    worst = 0.0
    for i in range(arch.n_params):
        bumped = params.copy()
        bumped[i] = params[i] + epsilon
        hi, _g = _loss_only(arch, bumped, X, y, pos_weight, spec.l2)
        bumped[i] = params[i] - epsilon
        lo, _g = _loss_only(arch, bumped, X, y, pos_weight, spec.l2)
        numeric = (hi - lo) / (2.0 * epsilon)
        rel = abs(analytic[i] - numeric) / max(abs(analytic[i]) + abs(numeric), 1e-8)
        worst = max(worst, rel)
    return worst


def _loss_only(arch, params, X, y, pos_weight, l2):
    z, _ = arch.raw_scores(params, X)
    return _weighted_bce(z, y, pos_weight) + l2 * float(params @ params), None


# --- checkpoints ----------------------------------------------------------


def save_checkpoint(model: TrainedClassifier, path) -> None:
    """Write a model as versioned plain text (floats via repr, so a
    load reproduces every value bit for bit)."""
    s = model.spec
    lines = [
        _CHECKPOINT_HEADER,
        f"kind = {s.kind}",
        f"seed = {s.seed}",
        f"hidden_units = {s.hidden_units}",
        f"conv_channels = {s.conv_channels}",
        f"kernel_width = {s.kernel_width}",
        f"learning_rate = {s.learning_rate!r}",
        f"epochs = {s.epochs}",
        f"batch_size = {s.batch_size}",
        f"momentum = {s.momentum!r}",
        f"l2 = {s.l2!r}",
        f"positive_class_weight = {s.positive_class_weight!r}",
        f"n_features = {model.n_features}",
        f"positive_weight = {model.positive_weight!r}",
        f"single_class = {int(model.single_class)}",
    ]
    for name in ("feature_mean", "feature_std", "params"):
        vector = getattr(model, name)
        lines.append(f"{name}: " + " ".join(repr(float(v)) for v in vector))
    lines.append("training_log: " + " ".join(repr(float(v)) for v in model.training_log))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> TrainedClassifier:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _CHECKPOINT_HEADER:
        found = lines[0] if lines else "<empty file>"
        raise CheckpointError(
            f"unsupported checkpoint header {found!r}; expected {_CHECKPOINT_HEADER!r}"
        )
    scalars: dict[str, str] = {}
    vectors: dict[str, np.ndarray] = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        if ": " in line and " = " not in line:
            name, _, payload = line.partition(": ")
            vectors[name] = np.array([float(t) for t in payload.split()], dtype=np.float64)
        elif line.endswith(":"):
            vectors[line[:-1]] = np.zeros(0)
        else:
            key, _, value = line.partition(" = ")
            scalars[key] = value
    try:
        pcw = scalars["positive_class_weight"]
        spec = ClassifierSpec(
            kind=scalars["kind"],
            seed=int(scalars["seed"]),
            hidden_units=int(scalars["hidden_units"]),
            conv_channels=int(scalars["conv_channels"]),
            kernel_width=int(scalars["kernel_width"]),
            learning_rate=float(scalars["learning_rate"]),
            epochs=int(scalars["epochs"]),
            batch_size=int(scalars["batch_size"]),
            momentum=float(scalars["momentum"]),
            l2=float(scalars["l2"]),
            positive_class_weight=None if pcw == "None" else float(pcw),
        )
        model = TrainedClassifier(
            spec=spec,
            n_features=int(scalars["n_features"]),
            feature_mean=vectors["feature_mean"],
            feature_std=vectors["feature_std"],
            params=vectors["params"],
            positive_weight=float(scalars["positive_weight"]),
            single_class=bool(int(scalars["single_class"])),
            training_log=tuple(float(v) for v in vectors.get("training_log", ())),
        )
    except KeyError as exc:
        raise CheckpointError(f"checkpoint missing field {exc.args[0]!r}") from None
    if len(model.feature_mean) != model.n_features or len(model.feature_std) != model.n_features:
        raise CheckpointError("checkpoint standardization vectors disagree with n_features")
    expected = _architecture(spec, model.n_features).n_params
    if len(model.params) != expected:
        raise CheckpointError(
            f"checkpoint has {len(model.params)} parameters, architecture needs {expected}"
        )
    return model
