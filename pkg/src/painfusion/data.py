"""Dataset handling: row-per-frame file parsing, subject splits, window
extraction, manifests, and statistically controlled synthetic data.

File layout per frame (1-based columns): 1-22 joint X coordinates,
23-44 Y, 45-66 Z, 67-70 sEMG channels, 71-72 opaque extras, 73 the
binary protective-behavior label. Columns beyond 73 are ignored.
"""

import csv
import hashlib
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyFile,
    InvalidConfig,
    InvalidLabel,
    ManifestError,
    NonNumericField,
    RowTooShort,
    SubjectInBothSplits,
    UnassignedSubject,
    WindowLongerThanSequence,
)
from .modality import (
    N_FEATURES,
    SEMG_INDICES,
    bifurcated_scheme,
    quadrifurcated_scheme,
    singular_scheme,
)

CHRONIC = "chronic_pain"
HEALTHY = "healthy"
GROUPS = (CHRONIC, HEALTHY)
SPLITS = ("train", "valid")

_MIN_COLUMNS = 73
_LABEL_TOL = 1e-9


@dataclass(frozen=True)
class FrameRecord:
    """One frame: 22 joints x 3 axes, 4 sEMG channels, binary label."""

    coords_x: tuple[float, ...]
    coords_y: tuple[float, ...]
    coords_z: tuple[float, ...]
    semg: tuple[float, ...]
    label: int
    extras: tuple[float, float] = (0.0, 0.0)

    def feature_row(self) -> np.ndarray:
        return np.array(
            self.coords_x + self.coords_y + self.coords_z + self.semg,
            dtype=np.float64,
        )


@dataclass(frozen=True)
class SequenceData:
    """One subject-session time series, stored column-major friendly:
    ``features`` is [n_frames x 70], ``labels`` is the per-frame binary
    vector, ``extras`` the two undocumented columns. Arrays are marked
    read-only; frame order matches file order."""

    subject_id: str
    group: str
    features: np.ndarray
    labels: np.ndarray
    extras: np.ndarray

    def __post_init__(self):
        for name in ("features", "labels", "extras"):
            getattr(self, name).flags.writeable = False

    @property
    def n_frames(self) -> int:
        return self.features.shape[0]

    def frame(self, i: int) -> FrameRecord:
        row = self.features[i]
        return FrameRecord(
            coords_x=tuple(float(v) for v in row[0:22]),
            coords_y=tuple(float(v) for v in row[22:44]),
            coords_z=tuple(float(v) for v in row[44:66]),
            semg=tuple(float(v) for v in row[66:70]),
            label=int(self.labels[i]),
            extras=(float(self.extras[i, 0]), float(self.extras[i, 1])),
        )

    @property
    def frames(self) -> list[FrameRecord]:
        return [self.frame(i) for i in range(self.n_frames)]


@dataclass(frozen=True)
class Window:
    """Fixed-length frame slab with one derived binary label. ``features``
    is a [window_length x 70] view into the source sequence."""

    subject_id: str
    features: np.ndarray
    label: int


def _decode(data) -> str:
    if isinstance(data, bytes):
        return data.decode("utf-8")
    if isinstance(data, str):
        return data
    raw = data.read()
    return raw.decode("utf-8") if isinstance(raw, bytes) else raw


def _locate_bad_token(rows: list[list[str]]) -> tuple[int, int, str]:
    for i, row in enumerate(rows):
        for j, token in enumerate(row):
            try:
                value = float(token)
            except ValueError:
                return i, j, token
            if not math.isfinite(value):
                return i, j, token
    raise AssertionError("no bad token found")  # pragma: no cover


def parse_emopain_file(data, subject_id: str, group: str) -> SequenceData:
    """Parse row-per-frame numeric text into a SequenceData.

    The field delimiter (comma or whitespace) is auto-detected from the
    first data row. Rows need at least 73 columns; extra columns are
    ignored. The label column must be 0 or 1 within 1e-9.
    """
    if group not in GROUPS:
        raise ManifestError(f"unknown group {group!r}; expected one of {GROUPS}")
    text = _decode(data)
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise EmptyFile(f"no data rows for subject {subject_id!r}")

    sep = "," if "," in lines[0] else None  # None -> any whitespace
    rows = []
    for i, line in enumerate(lines):
        tokens = [t for t in line.split(sep) if t != ""]
        if len(tokens) < _MIN_COLUMNS:
            raise RowTooShort(
                f"row {i + 1}: {len(tokens)} columns, need {_MIN_COLUMNS}"
            )
        rows.append(tokens[:_MIN_COLUMNS])

    try:
        matrix = np.array(rows, dtype=np.float64)
    except ValueError:
        i, j, token = _locate_bad_token(rows)
        raise NonNumericField(
            f"row {i + 1}, column {j + 1}: cannot parse {token!r}"
        ) from None
    if not np.isfinite(matrix).all():
        i, j = np.argwhere(~np.isfinite(matrix))[0]
        raise NonNumericField(
            f"row {i + 1}, column {j + 1}: non-finite value {rows[i][j]!r}"
        )

    raw_labels = matrix[:, 72]
    labels = np.empty(len(rows), dtype=np.int8)
    near_zero = np.abs(raw_labels) <= _LABEL_TOL
    near_one = np.abs(raw_labels - 1.0) <= _LABEL_TOL
    bad = ~(near_zero | near_one)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise InvalidLabel(f"row {i + 1}: label {raw_labels[i]!r} not in {{0, 1}}")
    labels[near_zero] = 0
    labels[near_one] = 1

    return SequenceData(
        subject_id=subject_id,
        group=group,
        features=matrix[:, :N_FEATURES].copy(),
        labels=labels,
        extras=matrix[:, 70:72].copy(),
    )


def serialize_sequence(seq: SequenceData, delimiter: str = ",") -> str:
    """Render a sequence back to row-per-frame text; parsing the result
    reproduces the sequence exactly (floats via shortest round-trip repr)."""
    out = []
    for i in range(seq.n_frames):
        fields = [repr(float(v)) for v in seq.features[i]]
        fields.extend(repr(float(v)) for v in seq.extras[i])
        fields.append(str(int(seq.labels[i])))
        out.append(delimiter.join(fields))
    return "\n".join(out) + "\n"


def write_sequence_file(seq: SequenceData, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_sequence(seq))


def split_train_valid(
    sequences: list[SequenceData],
    train_subjects: list[str],
    valid_subjects: list[str],
) -> tuple[list[SequenceData], list[SequenceData]]:
    """Split sequences by subject according to an explicit assignment."""
    overlap = set(train_subjects) & set(valid_subjects)
    if overlap:
        raise SubjectInBothSplits(f"subject(s) in both splits: {sorted(overlap)}")
    train_set, valid_set = set(train_subjects), set(valid_subjects)
    unassigned = sorted(
        {s.subject_id for s in sequences} - train_set - valid_set
    )
    if unassigned:
        raise UnassignedSubject(f"subject(s) in neither split: {unassigned}")
    train = [s for s in sequences if s.subject_id in train_set]
    valid = [s for s in sequences if s.subject_id in valid_set]
    return train, valid


def make_windows(
    seq: SequenceData,
    length: int,
    stride: int,
    positive_fraction_threshold: float = 0.5,
) -> list[Window]:
    """Slice a sequence into fixed-length windows at offsets 0, stride,
    2*stride, ...; a window is labeled 1 iff the fraction of label-1
    frames reaches the threshold. The trailing partial window is dropped.
    """
    if length < 1 or stride < 1:
        raise InvalidConfig(f"length and stride must be positive, got {length}, {stride}")
    if not (0.0 < positive_fraction_threshold <= 1.0):
        raise InvalidConfig(
            f"positive_fraction_threshold must lie in (0, 1], got {positive_fraction_threshold}"
        )
    n = seq.n_frames
    if length > n:
        raise WindowLongerThanSequence(f"window length {length} > {n} frames")
    cum = np.concatenate([[0], np.cumsum(seq.labels, dtype=np.int64)])
    windows = []
    for offset in range(0, n - length + 1, stride):
        positives = int(cum[offset + length] - cum[offset])
        label = 1 if positives / length >= positive_fraction_threshold else 0
        windows.append(Window(seq.subject_id, seq.features[offset:offset + length], label))
    return windows


def window_count(n_frames: int, length: int, stride: int) -> int:
    return (n_frames - length) // stride + 1


# --- synthetic data -------------------------------------------------------

EXPRESSION_MODES = ("joint", "complementary")


@dataclass(frozen=True)
class SyntheticConfig:
    """Generator settings. Labels arrive in contiguous bouts (geometric
    lengths) rather than i.i.d. frames; during positive bouts each
    signal-bearing modality's features are shifted by snr times a fixed
    unit-RMS pattern on top of cross-feature correlated noise.

    ``expression`` chooses whether every positive bout expresses all
    signal-bearing modalities ("joint") or exactly one body side per
    bout ("complementary"): movement-coordinate modalities form one
    side, muscle-activity channels the other, and each positive bout
    expresses only the modalities of the side it drew. Bouts are then
    predictable from either side alone, never both. Movement-side
    expression additionally carries a subject-fixed polarity (half the
    subjects shift up, half down), so coordinate shifts stay predictive
    within a subject while pooling across subjects cancels their mean.
    """

    n_subjects: int
    frames_per_subject: int
    positive_rate: float
    modality_snr: dict[str, float]
    seed: int
    mean_positive_bout: int = 120
    expression: str = "joint"
    noise_correlation: float = 0.3

    def validate(self) -> None:
        if self.n_subjects < 1 or self.frames_per_subject < 1:
            raise InvalidConfig("n_subjects and frames_per_subject must be positive")
        if not (0.0 < self.positive_rate < 1.0):
            raise InvalidConfig(
                f"positive_rate must lie strictly in (0, 1), got {self.positive_rate}"
            )
        if not self.modality_snr:
            raise InvalidConfig("modality_snr needs at least one entry")
        resolvable = set(_snr_index_map())
        for name, snr in self.modality_snr.items():
            if name not in resolvable:
                raise InvalidConfig(
                    f"unknown modality {name!r}; expected one of {sorted(resolvable)}"
                )
            if not (math.isfinite(snr) and snr >= 0.0):
                raise InvalidConfig(f"snr for {name!r} must be finite and >= 0")
        if self.mean_positive_bout < 1:
            raise InvalidConfig("mean_positive_bout must be >= 1")
        if self.expression not in EXPRESSION_MODES:
            raise InvalidConfig(
                f"expression must be one of {EXPRESSION_MODES}, got {self.expression!r}"
            )
        if not (0.0 <= self.noise_correlation < 1.0):
            raise InvalidConfig("noise_correlation must lie in [0, 1)")
        if self.seed < 0:
            raise InvalidConfig("seed must be a nonnegative integer")


def _snr_index_map() -> dict[str, tuple[int, ...]]:
    names: dict[str, tuple[int, ...]] = {}
    for scheme in (singular_scheme(), bifurcated_scheme(), quadrifurcated_scheme()):
        names.update(scheme.modalities)
    return names


def _stable_key(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def _signal_pattern(seed: int, name: str, width: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, _stable_key("pattern:" + name)]))
    pattern = rng.standard_normal(width)
    return pattern / math.sqrt(float(np.mean(pattern**2)))


def _draw_bouts(rng, n_frames: int, positive_rate: float, mean_positive: float):
    """Alternating label bouts with geometric lengths; stationary start."""
    mean_negative = mean_positive * (1.0 - positive_rate) / positive_rate
    p_pos = min(1.0, 1.0 / mean_positive)
    p_neg = min(1.0, 1.0 / mean_negative)
    labels = np.zeros(n_frames, dtype=np.int8)
    bouts = []
    state = 1 if rng.random() < positive_rate else 0
    t = 0
    while t < n_frames:
        length = int(rng.geometric(p_pos if state else p_neg))
        end = min(t + length, n_frames)
        if state:
            labels[t:end] = 1
            bouts.append((t, end))
        state = 1 - state
        t = end
    return labels, bouts


def generate_synthetic(config: SyntheticConfig) -> list[SequenceData]:
    """Deterministic synthetic dataset; a pure function of the config."""
    config.validate()
    index_map = _snr_index_map()
    patterns = {
        name: _signal_pattern(config.seed, name, len(index_map[name]))
        for name in config.modality_snr
    }
    active = [name for name, snr in config.modality_snr.items() if snr > 0.0]
    sides = [
        [n for n in active if min(index_map[n]) < SEMG_INDICES[0]],
        [n for n in active if min(index_map[n]) >= SEMG_INDICES[0]],
    ]
    sides = [s for s in sides if s]

    children = np.random.SeedSequence(config.seed).spawn(config.n_subjects)
    sequences = []
    c = config.noise_correlation
    for i in range(config.n_subjects):
        rng = np.random.default_rng(children[i])
        n = config.frames_per_subject
        labels, bouts = _draw_bouts(
            rng, n, config.positive_rate, float(config.mean_positive_bout)
        )
        shared = rng.standard_normal((n, 1))
        noise = rng.standard_normal((n, N_FEATURES))
        features = math.sqrt(c) * shared + math.sqrt(1.0 - c) * noise

        complementary = config.expression == "complementary" and sides
        polarity = 1.0 if (i // 2) % 2 == 0 else -1.0
        for start, end in bouts:
            if complementary:
                expressed = sides[int(rng.integers(len(sides)))]
            else:
                expressed = active
            for name in expressed:
                idx = list(index_map[name])
                sign = polarity if complementary and min(idx) < SEMG_INDICES[0] else 1.0
                features[start:end, idx] += sign * config.modality_snr[name] * patterns[name]

        sequences.append(
            SequenceData(
                subject_id=f"S{i + 1:02d}",
                group=CHRONIC if i % 2 == 0 else HEALTHY,
                features=features,
                labels=labels,
                extras=np.zeros((n, 2)),
            )
        )
    return sequences


# --- manifests ------------------------------------------------------------

MANIFEST_FIELDS = ("subject_id", "group", "split", "path")


@dataclass(frozen=True)
class ManifestEntry:
    subject_id: str
    group: str
    split: str
    path: str


def read_manifest(path) -> list[ManifestEntry]:
    if not os.path.exists(path):
        raise ManifestError(f"manifest not found: {path}")
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != list(MANIFEST_FIELDS):
            raise ManifestError(
                f"manifest {path}: header must be {','.join(MANIFEST_FIELDS)}"
            )
        for lineno, row in enumerate(reader, start=2):
            group = row["group"].strip()
            split = row["split"].strip()
            if group not in GROUPS:
                raise ManifestError(f"manifest {path} line {lineno}: bad group {group!r}")
            if split not in SPLITS:
                raise ManifestError(f"manifest {path} line {lineno}: bad split {split!r}")
            entries.append(
                ManifestEntry(row["subject_id"].strip(), group, split, row["path"].strip())
            )
    if not entries:
        raise ManifestError(f"manifest {path}: no records")
    return entries


def write_manifest(entries: list[ManifestEntry], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_FIELDS)
        for e in entries:
            writer.writerow([e.subject_id, e.group, e.split, e.path])


def load_sequences(manifest_path) -> list[tuple[ManifestEntry, SequenceData]]:
    """Read a manifest and parse every referenced data file; relative
    paths resolve against the manifest's directory."""
    entries = read_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    out = []
    for entry in entries:
        path = entry.path if os.path.isabs(entry.path) else os.path.join(base, entry.path)
        if not os.path.exists(path):
            raise ManifestError(f"data file not found: {path}")
        with open(path, "rb") as fh:
            seq = parse_emopain_file(fh.read(), entry.subject_id, entry.group)
        out.append((entry, seq))
    return out


def split_by_manifest(
    pairs: list[tuple[ManifestEntry, SequenceData]],
) -> tuple[list[SequenceData], list[SequenceData]]:
    train_ids = sorted({e.subject_id for e, _ in pairs if e.split == "train"})
    valid_ids = sorted({e.subject_id for e, _ in pairs if e.split == "valid"})
    sequences = [seq for _, seq in pairs]
    return split_train_valid(sequences, train_ids, valid_ids)
