"""Rank statistics, correlation coefficients, normality diagnostics, and
derivation of per-modality fusion weights from feature-label correlations.

All correlation routines return a :class:`CorrelationResult`. Constant input
is never an error: it yields ``degenerate=True`` with coefficient 0 by
convention, which downstream weighting treats as "no relevance".
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyDataset,
    EmptyInput,
    LengthMismatch,
    NonFiniteInput,
    OutOfDomain,
    SchemeFeatureOutOfRange,
    TooFewSamples,
    ZeroVariance,
)
from .modality import ModalityScheme

SPEARMAN = "spearman"
PEARSON = "pearson"
KENDALL = "kendall_tau_b"

STATISTICAL = "statistical"
AVERAGE = "average"
SINGULAR = "singular"

REDUCTIONS = ("mean", "max", "std")


@dataclass(frozen=True)
class CorrelationResult:
    coefficient: float
    n: int
    method: str
    degenerate: bool = False


@dataclass(frozen=True)
class NormalityReport:
    """Moment-based normality diagnostics plus Q-Q pairs.

    ``qq_pairs`` is an array of (theoretical_quantile, sample_quantile)
    rows sorted ascending in the theoretical coordinate. The theoretical
    side is the standard-normal quantile at probability (i - 0.5)/n,
    rescaled by the sample mean and standard deviation.
    """

    n: int
    mean: float
    std: float
    skewness: float
    excess_kurtosis: float
    jarque_bera_stat: float
    jarque_bera_p: float
    qq_pairs: np.ndarray

    def to_text(self) -> str:
        lines = [
            f"n = {self.n}",
            f"mean = {self.mean!r}",
            f"std = {self.std!r}",
            f"skewness = {self.skewness!r}",
            f"excess_kurtosis = {self.excess_kurtosis!r}",
            f"jarque_bera_stat = {self.jarque_bera_stat!r}",
            f"jarque_bera_p = {self.jarque_bera_p!r}",
        ]
        return "\n".join(lines) + "\n"

    def qq_csv(self) -> str:
        lines = ["theoretical_quantile,sample_quantile"]
        for t, s in self.qq_pairs:
            lines.append(f"{t!r},{s!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class FusionWeights:
    """Normalized nonnegative per-modality weights with provenance.

    ``raw_relevance`` holds the pre-normalization aggregate |rho| per
    modality (all 1.0 for average weighting). Weights sum to 1 within
    1e-12 and share the scheme's key set.
    """

    scheme_name: str
    weights: dict[str, float]
    provenance: str
    raw_relevance: dict[str, float]

    def __post_init__(self):
        total = math.fsum(self.weights.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, not 1")
        if any(w < 0.0 for w in self.weights.values()):
            raise ValueError("negative weight")
        if set(self.weights) != set(self.raw_relevance):
            raise ValueError("weights/raw_relevance key mismatch")

    def to_text(self) -> str:
        lines = [
            f"scheme = {self.scheme_name}",
            f"provenance = {self.provenance}",
        ]
        for name in self.weights:
            lines.append(f"weight.{name} = {self.weights[name]!r}")
        for name in self.raw_relevance:
            lines.append(f"raw_relevance.{name} = {self.raw_relevance[name]!r}")
        return "\n".join(lines) + "\n"


def _as_finite_vector(values, *, min_n: int) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        x = x.reshape(-1)
    if x.size == 0:
        raise EmptyInput("empty input vector")
    if x.size < min_n:
        raise TooFewSamples(f"need at least {min_n} samples, got {x.size}")
    if not np.isfinite(x).all():
        raise NonFiniteInput("input contains NaN or Inf")
    return x


def rank_with_ties(values) -> np.ndarray:
    """Fractional (average) ranks, 1-based; ties share the mean of the
    rank positions they span. The rank sum is exactly n(n+1)/2."""
    x = _as_finite_vector(values, min_n=1)
    n = x.size
    order = np.argsort(x, kind="stable")
    xs = x[order]
    boundaries = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1], True])
    starts, ends = boundaries[:-1], boundaries[1:]
    # average of 1-based positions start+1 .. end
    group_rank = (starts + ends - 1) * 0.5 + 1.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(group_rank, ends - starts)
    return ranks


def _validate_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    xa = np.asarray(x, dtype=np.float64).reshape(-1)
    ya = np.asarray(y, dtype=np.float64).reshape(-1)
    if xa.size != ya.size:
        raise LengthMismatch(f"length {xa.size} vs {ya.size}")
    if xa.size < 3:
        raise TooFewSamples(f"need at least 3 samples, got {xa.size}")
    if not (np.isfinite(xa).all() and np.isfinite(ya).all()):
        raise NonFiniteInput("input contains NaN or Inf")
    return xa, ya


def _pearson_coefficient(x: np.ndarray, y: np.ndarray) -> tuple[float, bool]:
    if x.max() == x.min() or y.max() == y.min():
        return 0.0, True
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(np.dot(xc, xc))
    syy = float(np.dot(yc, yc))
    if sxx <= 0.0 or syy <= 0.0:
        return 0.0, True
    r = float(np.dot(xc, yc)) / math.sqrt(sxx * syy)
    return r, False


def pearson_r(x, y) -> CorrelationResult:
    """Product-moment correlation; constant input is degenerate."""
    xa, ya = _validate_pair(x, y)
    r, degenerate = _pearson_coefficient(xa, ya)
    return CorrelationResult(r, xa.size, PEARSON, degenerate)


def spearman_rho(x, y) -> CorrelationResult:
    """Spearman's rho as Pearson correlation of fractional ranks.

    Computed rank-then-Pearson rather than via the 6*sum(d^2) shortcut,
    which is invalid under ties (and ties are certain against a binary
    label).
    """
    xa, ya = _validate_pair(x, y)
    if xa.max() == xa.min() or ya.max() == ya.min():
        return CorrelationResult(0.0, xa.size, SPEARMAN, True)
    rho, degenerate = _pearson_coefficient(rank_with_ties(xa), rank_with_ties(ya))
    return CorrelationResult(rho, xa.size, SPEARMAN, degenerate)


def _merge_count(seq: list) -> tuple[list, int]:
    # counts strict inversions (left > right); ties are not inversions
    n = len(seq)
    if n <= 1:
        return seq, 0
    mid = n // 2
    left, inv_l = _merge_count(seq[:mid])
    right, inv_r = _merge_count(seq[mid:])
    merged = []
    inv = inv_l + inv_r
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            j += 1
            inv += len(left) - i
    merged.extend(left[i:])
    merged.extend(right[j:])
    return merged, inv


def _tied_pair_count(sorted_values: np.ndarray) -> int:
    boundaries = np.flatnonzero(
        np.r_[True, sorted_values[1:] != sorted_values[:-1], True]
    )
    counts = np.diff(boundaries)
    return int(sum(int(c) * (int(c) - 1) // 2 for c in counts))


def kendall_tau_b(x, y) -> CorrelationResult:
    """Tie-corrected Kendall tau-b via merge-sort inversion counting.

    Sorting by (x, y) and counting strict inversions in the y sequence
    yields the discordant-pair count in O(n log n); tie corrections come
    from run lengths. All pair counts are exact integers, so the result
    matches direct pair enumeration bit for bit.
    """
    xa, ya = _validate_pair(x, y)
    n = xa.size
    order = np.lexsort((ya, xa))
    xs, ys = xa[order], ya[order]

    n0 = n * (n - 1) // 2
    tx = _tied_pair_count(xs)
    ty = _tied_pair_count(np.sort(ya, kind="stable"))
    if tx == n0 or ty == n0:
        return CorrelationResult(0.0, n, KENDALL, True)

    both_boundaries = np.flatnonzero(
        np.r_[True, (xs[1:] != xs[:-1]) | (ys[1:] != ys[:-1]), True]
    )
    counts = np.diff(both_boundaries)
    txy = int(sum(int(c) * (int(c) - 1) // 2 for c in counts))

    _, discordant = _merge_count(ys.tolist())
    c_minus_d = n0 - tx - ty + txy - 2 * discordant
    tau = c_minus_d / math.sqrt((n0 - tx) * (n0 - ty))
    return CorrelationResult(tau, n, KENDALL, False)


# Rational approximation for the inverse standard-normal CDF (Acklam's
# coefficients), then one Halley refinement against erfc to push the
# absolute error to ~1e-15 over (1e-10, 1 - 1e-10).
_NQ_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_NQ_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
_NQ_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_NQ_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)
_NQ_LOW = 0.02425


def normal_quantile(p: float) -> float:
    """Inverse standard-normal CDF, absolute error well under 1e-8."""
    if not (0.0 < p < 1.0):
        raise OutOfDomain(f"probability must lie strictly in (0, 1), got {p!r}")
    a, b, c, d = _NQ_A, _NQ_B, _NQ_C, _NQ_D
    if p < _NQ_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    elif p <= 1.0 - _NQ_LOW:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    # Halley step: u = (Phi(x) - p)/phi(x)
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


def normality_report(values, qq_points: int | None = None) -> NormalityReport:
    """Sample moments, Jarque-Bera statistic, and Q-Q pairs.

    Skewness and excess kurtosis are the bias-uncorrected moment
    estimators. JB = n*(g1^2/6 + g2^2/24) with the p-value from the
    chi-square(2) upper tail, which is exp(-JB/2).

    ``qq_points`` caps how many Q-Q pairs are materialized: when set and
    smaller than n, an evenly spaced subset of order statistics is used,
    each still at its exact (rank - 0.5)/n plotting position.
    """
    x = _as_finite_vector(values, min_n=8)
    n = x.size
    if x.max() == x.min():
        raise ZeroVariance("constant input has no normality diagnostics")
    mean = float(x.mean())
    centered = x - mean
    m2 = float(np.mean(centered**2))
    if m2 <= 0.0:
        raise ZeroVariance("zero variance input")
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    std = math.sqrt(m2)
    g1 = m3 / m2**1.5
    g2 = m4 / (m2 * m2) - 3.0
    jb = n * (g1 * g1 / 6.0 + g2 * g2 / 24.0)
    jb_p = math.exp(-jb / 2.0)

    xs = np.sort(x, kind="stable")
    if qq_points is not None and qq_points < n:
        idx = np.unique(np.linspace(0, n - 1, qq_points).round().astype(np.int64))
    else:
        idx = np.arange(n)
    probs = (idx + 0.5) / n
    theoretical = np.array([mean + std * normal_quantile(p) for p in probs])
    qq = np.column_stack([theoretical, xs[idx]])
    return NormalityReport(n, mean, std, g1, g2, jb, jb_p, qq)


def recommend_method(pooled: NormalityReport, alpha: float = 0.05) -> list[str]:
    """Correlation-method recommendation lines from a pooled report."""
    rejected = pooled.jarque_bera_p < alpha
    lines = []
    if rejected:
        lines.append(
            f"normality rejected (jarque_bera_p = {pooled.jarque_bera_p:.3g} "
            f"< alpha = {alpha:g}): heavy tails / skew make Pearson and "
            "ANOVA assumptions untenable"
        )
        lines.append(
            "recommendation: opt for Spearman rank correlation "
            "(monotonic association, distribution-free, scales to large n)"
        )
        lines.append(
            "note: Kendall tau-b is an exact alternative for small samples "
            "or heavy ties, but its pair-enumeration oracle is quadratic"
        )
    else:
        lines.append(
            f"normality not rejected (jarque_bera_p = {pooled.jarque_bera_p:.3g} "
            f">= alpha = {alpha:g})"
        )
        lines.append(
            "recommendation: Pearson correlation is admissible; Spearman "
            "remains valid and is used for weighting by default"
        )
    return lines


def _reduce_windows(windows, reduction: str) -> np.ndarray:
    stacked = np.stack([np.asarray(w.features, dtype=np.float64) for w in windows])
    if reduction == "mean":
        return stacked.mean(axis=1)
    if reduction == "max":
        return stacked.max(axis=1)
    if reduction == "std":
        return stacked.std(axis=1)
    raise ValueError(f"unknown reduction {reduction!r}")


def normalize_relevances(raw: dict[str, float]) -> dict[str, float] | None:
    """Relevances -> weights by total-sum normalization; None if all zero."""
    total = math.fsum(raw.values())
    if total <= 0.0:
        return None
    return {name: value / total for name, value in raw.items()}


def modality_weights(
    windows,
    labels,
    scheme: ModalityScheme,
    reduction: str = "mean",
) -> FusionWeights:
    """Fusion weights from per-feature Spearman correlation against labels.

    Each feature is reduced over time within its window (mean by default),
    correlated with the window labels, and a modality's raw relevance is
    the mean |rho| over its features (degenerate features contribute 0).
    All-zero relevance falls back to equal weights with provenance
    downgraded to "average".
    """
    if len(windows) == 0:
        raise EmptyDataset("no windows")
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if y.size != len(windows):
        raise LengthMismatch(f"{len(windows)} windows vs {y.size} labels")
    reduced = _reduce_windows(windows, reduction)
    n_features = reduced.shape[1]
    for name, indices in scheme.modalities.items():
        if indices and (indices[-1] >= n_features or indices[0] < 0):
            raise SchemeFeatureOutOfRange(
                f"modality {name!r} references feature outside [0, {n_features})"
            )

    abs_rho = np.empty(n_features)
    for j in range(n_features):
        result = spearman_rho(reduced[:, j], y)
        abs_rho[j] = 0.0 if result.degenerate else abs(result.coefficient)

    raw = {
        name: float(np.mean(abs_rho[np.asarray(indices)]))
        for name, indices in scheme.modalities.items()
    }
    weights = normalize_relevances(raw)
    if weights is None:
        m = len(scheme.modalities)
        weights = {name: 1.0 / m for name in scheme.modalities}
        provenance = SINGULAR if m == 1 else AVERAGE
    else:
        provenance = SINGULAR if len(scheme.modalities) == 1 else STATISTICAL
    return FusionWeights(scheme.name, weights, provenance, raw)


def average_weights(scheme: ModalityScheme) -> FusionWeights:
    """Equal weights over the scheme's modalities (1/M each)."""
    m = len(scheme.modalities)
    weights = {name: 1.0 / m for name in scheme.modalities}
    raw = {name: 1.0 for name in scheme.modalities}
    provenance = SINGULAR if m == 1 else AVERAGE
    return FusionWeights(scheme.name, weights, provenance, raw)
