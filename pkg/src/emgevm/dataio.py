"""Dataset ingestion, windowing, trial splits, and synthetic fixtures.

On-disk layout: one CSV per (subject, gesture, trial) with one row per
sample and one column per channel.  A JSON manifest maps each recording
tuple to its file and channel columns; ``scan_default_layout`` builds the
manifest automatically for directories that follow the published naming
convention (``s<N>/<label>-<trial>.csv``).
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, DataError

# Canonical 10-gesture label set: five individual fingers, four thumb
# combinations, and hand close.
GESTURE_LABELS = ("T", "I", "M", "R", "L", "T-I", "T-M", "T-R", "T-L", "HC")

DEFAULT_SAMPLE_RATE = 4000.0

# Filename tokens accepted by the layout scanner, normalized to lower case
# with "-"/"_" treated the same.
_LABEL_ALIASES = {
    "t": "T", "thumb": "T",
    "i": "I", "index": "I",
    "m": "M", "middle": "M",
    "r": "R", "ring": "R",
    "l": "L", "little": "L", "pinky": "L",
    "t-i": "T-I", "thumb-index": "T-I", "ti": "T-I",
    "t-m": "T-M", "thumb-middle": "T-M", "tm": "T-M",
    "t-r": "T-R", "thumb-ring": "T-R", "tr": "T-R",
    "t-l": "T-L", "thumb-little": "T-L", "tl": "T-L",
    "hc": "HC", "hand-close": "HC", "closed": "HC", "fist": "HC",
}


def label_sort_key(label) -> tuple:
    """Canonical ordering: known gesture labels first, anything else after."""
    try:
        return (0, GESTURE_LABELS.index(label), "")
    except (ValueError, TypeError):
        return (1, 0, str(label))


class FrameOrigin(NamedTuple):
    subject: int | None
    label: object
    trial: int | None
    start: int


@dataclass
class RawRecording:
    """One multi-channel recording of a single gesture trial."""

    subject_id: int
    gesture_label: str
    trial_index: int
    channels: np.ndarray  # shape (n_channels, n_samples)
    sample_rate: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=float)
        if self.channels.ndim != 2 or self.channels.shape[1] == 0:
            raise DataError(
                f"recording (subject={self.subject_id}, label={self.gesture_label}, "
                f"trial={self.trial_index}) must have equal-length non-empty channels"
            )
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")
        if not 1 <= self.trial_index <= 6:
            raise DataError(f"trial_index {self.trial_index} outside 1..6")
        if self.gesture_label not in GESTURE_LABELS:
            raise DataError(f"unknown gesture label {self.gesture_label!r}")

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]


@dataclass
class Frame:
    """One fixed-length window of a single channel."""

    samples: np.ndarray
    channel_id: int = 0
    origin: FrameOrigin = FrameOrigin(None, None, None, 0)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)

    def __len__(self) -> int:
        return self.samples.size


@dataclass
class LabeledDataset:
    """Feature matrix plus labels, with an explicit class ordering."""

    features: np.ndarray  # shape (n_examples, n_features)
    labels: list
    class_list: list = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise ConfigError("features must be a 2-D array")
        if len(self.labels) != self.features.shape[0]:
            raise ConfigError("labels and features row count differ")
        if not self.class_list:
            self.class_list = sorted(set(self.labels), key=label_sort_key)
        missing = set(self.labels) - set(self.class_list)
        if missing:
            raise ConfigError(f"labels {sorted(map(str, missing))} not in class_list")

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass
class ManifestEntry:
    subject: int
    label: str
    trial: int
    path: str
    channel_columns: list[int]


@dataclass
class Manifest:
    entries: list[ManifestEntry]
    sample_rate: float = DEFAULT_SAMPLE_RATE
    has_header: bool = False

    def sorted_entries(self) -> list[ManifestEntry]:
        return sorted(
            self.entries, key=lambda e: (e.subject, label_sort_key(e.label), e.trial)
        )


def load_manifest(path) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "entries" not in raw:
        raise DataError(f"manifest {path} must be an object with an 'entries' list")
    entries = []
    for i, item in enumerate(raw["entries"]):
        try:
            entries.append(
                ManifestEntry(
                    subject=int(item["subject"]),
                    label=str(item["label"]),
                    trial=int(item["trial"]),
                    path=str(item["path"]),
                    channel_columns=[int(c) for c in item["channel_columns"]],
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"manifest {path} entry {i} malformed: {exc}") from exc
    return Manifest(
        entries=entries,
        sample_rate=float(raw.get("sample_rate", DEFAULT_SAMPLE_RATE)),
        has_header=bool(raw.get("has_header", False)),
    )


def write_manifest(manifest: Manifest, path) -> None:
    payload = {
        "sample_rate": manifest.sample_rate,
        "has_header": manifest.has_header,
        "entries": [
            {
                "subject": e.subject,
                "label": e.label,
                "trial": e.trial,
                "path": e.path,
                "channel_columns": e.channel_columns,
            }
            for e in manifest.sorted_entries()
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def scan_default_layout(root, sample_rate: float = DEFAULT_SAMPLE_RATE) -> Manifest:
    """Build a manifest from ``<root>/s<N>/<label>-<trial>.csv`` style trees.

    Subject directories may be named ``s1``, ``S1``, or ``EMG-S1``; label
    tokens may use long names (``thumb-index``) or short codes (``T-I``)
    with ``-`` or ``_`` separators.  Unrecognized files are skipped.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root is not a directory: {root}")
    entries = []
    for subdir in sorted(root.iterdir()):
        if not subdir.is_dir():
            continue
        name = subdir.name.lower()
        if name.startswith("emg-s"):
            digits = name[5:]
        elif name.startswith("s"):
            digits = name[1:]
        else:
            continue
        if not digits.isdigit():
            continue
        subject = int(digits)
        for f in sorted(subdir.glob("*.csv")):
            stem = f.stem.lower().replace("_", "-")
            token, sep, trial_part = stem.rpartition("-")
            if not sep or not trial_part.isdigit():
                continue
            label = _LABEL_ALIASES.get(token)
            trial = int(trial_part)
            if label is None or not 1 <= trial <= 6:
                continue
            n_cols = _peek_column_count(f)
            entries.append(
                ManifestEntry(
                    subject=subject,
                    label=label,
                    trial=trial,
                    path=str(f.relative_to(root)),
                    channel_columns=list(range(n_cols)),
                )
            )
    if not entries:
        warnings.warn(f"no dataset files recognized under {root}")
    return Manifest(entries=entries, sample_rate=sample_rate)


def _peek_column_count(path: Path) -> int:
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row:
                return len(row)
    return 0


def load_recording(
    root, entry: ManifestEntry, sample_rate: float, has_header: bool = False
) -> RawRecording:
    """Load one manifest entry into a RawRecording."""
    path = Path(root) / entry.path
    ident = f"(subject={entry.subject}, label={entry.label}, trial={entry.trial})"
    if not path.exists():
        raise DataError(f"missing data file for {ident}: {path}")
    skip = 1 if has_header else 0
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2, comments="#")
    except ValueError:
        _raise_csv_error(path, skip)
        raise  # unreachable; keeps type checkers happy
    if data.shape[0] == 0:
        raise DataError(f"data file for {ident} is empty: {path}")
    cols = entry.channel_columns
    if max(cols) >= data.shape[1]:
        raise DataError(
            f"{path}: channel column {max(cols)} out of range "
            f"(file has {data.shape[1]} columns)"
        )
    return RawRecording(
        subject_id=entry.subject,
        gesture_label=entry.label,
        trial_index=entry.trial,
        channels=data[:, cols].T,
        sample_rate=sample_rate,
    )


def _raise_csv_error(path: Path, skip: int) -> None:
    # Rescan with the csv module to report the exact offending line.
    with open(path, newline="") as fh:
        width = None
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if lineno <= skip or not row:
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(
                    f"{path}:{lineno}: row has {len(row)} columns, expected {width}"
                )
            for cell in row:
                try:
                    float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: not a number: {cell!r}"
                    ) from None
    raise DataError(f"{path}: malformed CSV")


def load_dataset(root, manifest: Manifest | str | Path) -> list[RawRecording]:
    """Load every recording named by the manifest, in canonical order."""
    if not isinstance(manifest, Manifest):
        manifest = load_manifest(manifest)
    root = Path(root)
    if not root.exists():
        raise DataError(f"dataset root does not exist: {root}")
    recs = [
        load_recording(root, e, manifest.sample_rate, manifest.has_header)
        for e in manifest.sorted_entries()
    ]
    if not recs:
        warnings.warn(f"manifest for {root} names no recordings")
    return recs


def split_by_trial(
    recordings: Sequence[RawRecording],
    train_trials: Iterable[int],
    test_trials: Iterable[int],
) -> tuple[list[RawRecording], list[RawRecording]]:
    """Route recordings by trial index; trials in neither set are dropped."""
    train_set, test_set = set(train_trials), set(test_trials)
    overlap = train_set & test_set
    if overlap:
        raise ConfigError(f"train and test trials overlap: {sorted(overlap)}")
    train = [r for r in recordings if r.trial_index in train_set]
    test = [r for r in recordings if r.trial_index in test_set]
    return train, test


def window_signal(
    channel,
    win_len: int,
    step: int,
    *,
    channel_id: int = 0,
    subject: int | None = None,
    label=None,
    trial: int | None = None,
) -> list[Frame]:
    """Slice a channel into frames at offsets 0, step, 2*step, ...

    Yields ``floor((N - win_len) / step) + 1`` frames when the signal holds
    at least one full window, otherwise an empty list.
    """
    if win_len < 1 or step < 1:
        raise ConfigError("win_len and step must be >= 1")
    x = np.asarray(channel, dtype=float)
    n = x.size
    if n < win_len:
        return []
    count = (n - win_len) // step + 1
    return [
        Frame(
            samples=x[i * step : i * step + win_len].copy(),
            channel_id=channel_id,
            origin=FrameOrigin(subject, label, trial, i * step),
        )
        for i in range(count)
    ]


def trim_signal(channel, head_frac: float = 0.1, tail_frac: float = 0.1) -> np.ndarray:
    """Drop rest-pose margins from the head and tail of a recording."""
    if head_frac < 0 or tail_frac < 0 or head_frac + tail_frac >= 1:
        raise ConfigError("trim fractions must be >= 0 and sum to < 1")
    x = np.asarray(channel, dtype=float)
    n = x.size
    lo = int(n * head_frac)
    hi = n - int(n * tail_frac)
    return x[lo:hi]


def gen_ar_process(ar_coeffs, noise_std: float, n: int, seed) -> np.ndarray:
    """Synthesize ``v(t) = -sum_i a_i v(t-i) + eps(t)`` with Gaussian noise.

    Deterministic for a fixed seed.  The caller is responsible for passing a
    stable polynomial (see ``arburg.is_stable_ar``); a fixed warm-up segment
    is generated and discarded so the returned samples are near-stationary.
    """
    a = np.asarray(ar_coeffs, dtype=float)
    rng = np.random.default_rng(seed)
    burn = 100 + 10 * a.size
    eps = rng.standard_normal(n + burn) * float(noise_std)
    v = lfilter([1.0], np.concatenate(([1.0], a)), eps)
    return v[burn:]


def gen_gaussian_blobs(centers, std: float, per_class: int, seed) -> LabeledDataset:
    """Isotropic Gaussian point clouds, one class per center."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if per_class < 1:
        raise ConfigError("per_class must be >= 1")
    if centers.shape[0] == 0:
        raise ConfigError("need at least one center")
    rng = np.random.default_rng(seed)
    points = []
    labels = []
    for i, c in enumerate(centers):
        points.append(c + std * rng.standard_normal((per_class, centers.shape[1])))
        labels.extend([i] * per_class)
    return LabeledDataset(
        features=np.vstack(points),
        labels=labels,
        class_list=list(range(centers.shape[0])),
    )
