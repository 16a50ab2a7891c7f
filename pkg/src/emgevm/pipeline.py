"""End-to-end wiring: recordings -> windows -> features -> model -> report.

Everything here is deterministic for a fixed (config, dataset) pair: the
manifest is traversed in canonical order, thread-parallel extraction merges
results in submission order, and all float serialization uses shortest
round-trip ``repr``.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict, replace
from pathlib import Path

import numpy as np

from . import arburg, baselines, dataio, evm, modelio, preprocess
from .errors import ConfigError, DataError


@dataclass
class RunConfig:
    """Every knob that determines a run's outputs."""

    dataset_root: str | None = None
    manifest: str | None = None
    sample_rate: float = dataio.DEFAULT_SAMPLE_RATE
    window_len: int = 1000
    window_step: int = 500
    trim_head: float = 0.1
    trim_tail: float = 0.1
    filter_enabled: bool = True
    notch_freq: float = 50.0
    notch_q: float = 30.0
    band_low: float = 20.0
    band_high: float = 450.0
    filter_order: int = 4
    ar_order: int = 10
    include_noise_var: bool = False
    classifier: str = "evm"
    metric: str = evm.COSINE
    tail_size: int = 27
    cover_threshold: float | None = 0.3
    reject_threshold: float = 0.0
    knn_k: int = 5
    train_trials: tuple = (1, 2, 3, 4)
    test_trials: tuple = (5, 6)
    seed: int = 0
    vote_per_trial: bool = False
    per_subject: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.classifier not in ("evm", "knn"):
            raise ConfigError(f"classifier must be 'evm' or 'knn', got {self.classifier!r}")
        if not 1 <= self.ar_order <= 32:
            raise ConfigError("ar_order must lie in 1..32")
        if self.window_len < 1 or self.window_step < 1:
            raise ConfigError("window_len and window_step must be >= 1")
        if self.window_len <= self.ar_order:
            raise ConfigError("window_len must exceed ar_order")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        self.train_trials = tuple(sorted(int(t) for t in self.train_trials))
        self.test_trials = tuple(sorted(int(t) for t in self.test_trials))

    def require_disjoint_trials(self) -> None:
        """For joint train+eval flows; eval alone may reuse training trials."""
        overlap = set(self.train_trials) & set(self.test_trials)
        if overlap:
            raise ConfigError(f"train and test trials overlap: {sorted(overlap)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["train_trials"] = list(self.train_trials)
        d["test_trials"] = list(self.test_trials)
        # jobs is an execution knob, not part of the result-determining state
        del d["jobs"]
        return d

    def echo(self) -> str:
        """Canonical one-line JSON for provenance comments."""
        return json.dumps(self.to_dict(), sort_keys=True)

    def filters(self) -> list[preprocess.FilterSpec]:
        if not self.filter_enabled:
            return []
        return [
            preprocess.FilterSpec(
                kind=preprocess.NOTCH,
                sample_rate=self.sample_rate,
                notch_freq=self.notch_freq,
                notch_q=self.notch_q,
            ),
            preprocess.FilterSpec(
                kind=preprocess.BANDPASS,
                sample_rate=self.sample_rate,
                band_low=self.band_low,
                band_high=self.band_high,
                filter_order=self.filter_order,
            ),
        ]


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"config file {path} has unknown keys: {sorted(unknown)}")
    return raw


def build_config(file_path=None, **overrides) -> RunConfig:
    """Config file values first, explicit (non-None) overrides on top."""
    values = load_config_file(file_path) if file_path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


@dataclass
class FeatureTable:
    """Window-level features with their provenance columns."""

    subject: np.ndarray
    label: list
    trial: np.ndarray
    window: np.ndarray
    features: np.ndarray
    feature_names: list

    def __len__(self) -> int:
        return self.features.shape[0]

    def select(self, mask: np.ndarray) -> "FeatureTable":
        return FeatureTable(
            subject=self.subject[mask],
            label=[lab for lab, m in zip(self.label, mask) if m],
            trial=self.trial[mask],
            window=self.window[mask],
            features=self.features[mask],
            feature_names=self.feature_names,
        )


def feature_names(n_channels: int, order: int, include_noise_var: bool) -> list[str]:
    names = []
    for ch in range(n_channels):
        names.extend(f"ch{ch}_k{i}" for i in range(1, order + 1))
        if include_noise_var:
            names.append(f"ch{ch}_nv")
    return names


def _extract_entry(root, entry, manifest, cfg: RunConfig):
    rec = dataio.load_recording(root, entry, manifest.sample_rate, manifest.has_header)
    filters = cfg.filters()
    per_channel_frames = []
    for ch in range(rec.n_channels):
        x = rec.channels[ch]
        if filters:
            x = preprocess.apply_filter_chain(x, filters)
        x = dataio.trim_signal(x, cfg.trim_head, cfg.trim_tail)
        per_channel_frames.append(
            dataio.window_signal(
                x,
                cfg.window_len,
                cfg.window_step,
                channel_id=ch,
                subject=rec.subject_id,
                label=rec.gesture_label,
                trial=rec.trial_index,
            )
        )
    n_windows = min((len(f) for f in per_channel_frames), default=0)
    rows = []
    for w in range(n_windows):
        vec = arburg.extract_features(
            [per_channel_frames[ch][w] for ch in range(rec.n_channels)],
            cfg.ar_order,
            cfg.include_noise_var,
        )
        rows.append((rec.subject_id, rec.gesture_label, rec.trial_index, w, vec))
    return rows


def resolve_manifest(cfg: RunConfig) -> dataio.Manifest:
    """Locate the manifest: explicit path, <root>/manifest.json, or a scan."""
    if cfg.dataset_root is None:
        raise ConfigError("dataset_root is required for extraction")
    root = Path(cfg.dataset_root)
    if not root.exists():
        raise DataError(f"dataset root does not exist: {root}")
    if cfg.manifest:
        return dataio.load_manifest(cfg.manifest)
    default = root / "manifest.json"
    if default.exists():
        return dataio.load_manifest(default)
    return dataio.scan_default_layout(root, cfg.sample_rate)


def extract_table(cfg: RunConfig, manifest: dataio.Manifest | None = None) -> FeatureTable:
    """Extract window features for every manifest entry, in canonical order."""
    if manifest is None:
        manifest = resolve_manifest(cfg)
    root = Path(cfg.dataset_root)
    entries = manifest.sorted_entries()
    if not entries:
        raise DataError(f"no recordings found under {root}")
    cfg = replace(cfg, sample_rate=manifest.sample_rate)

    if cfg.jobs == 1:
        per_entry = [_extract_entry(root, e, manifest, cfg) for e in entries]
    else:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            per_entry = list(
                pool.map(lambda e: _extract_entry(root, e, manifest, cfg), entries)
            )
    rows = [r for chunk in per_entry for r in chunk]
    if not rows:
        raise DataError(
            "no windows extracted; signals shorter than the window length"
        )
    n_channels = len(rows[0][4]) // (
        cfg.ar_order + (1 if cfg.include_noise_var else 0)
    )
    return FeatureTable(
        subject=np.array([r[0] for r in rows], dtype=int),
        label=[r[1] for r in rows],
        trial=np.array([r[2] for r in rows], dtype=int),
        window=np.array([r[3] for r in rows], dtype=int),
        features=np.vstack([r[4] for r in rows]),
        feature_names=feature_names(n_channels, cfg.ar_order, cfg.include_noise_var),
    )


def write_features_csv(table: FeatureTable, path, config_echo: str | None = None):
    """Plain CSV with an optional leading ``# config:`` provenance comment."""
    lines = []
    if config_echo is not None:
        lines.append(f"# config: {config_echo}")
    lines.append("subject,label,trial,window," + ",".join(table.feature_names))
    for i in range(len(table)):
        feats = ",".join(repr(float(v)) for v in table.features[i])
        lines.append(
            f"{table.subject[i]},{table.label[i]},{table.trial[i]},"
            f"{table.window[i]},{feats}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_features_csv(path) -> FeatureTable:
    path = Path(path)
    if not path.exists():
        raise DataError(f"features file not found: {path}")
    subjects, labels, trials, windows, feats = [], [], [], [], []
    names = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if names is None:
                cols = line.split(",")
                if cols[:4] != ["subject", "label", "trial", "window"]:
                    raise DataError(f"{path}:{lineno}: unexpected feature CSV header")
                names = cols[4:]
                continue
            parts = line.split(",")
            if len(parts) != 4 + len(names):
                raise DataError(
                    f"{path}:{lineno}: expected {4 + len(names)} columns, got {len(parts)}"
                )
            try:
                subjects.append(int(parts[0]))
                labels.append(parts[1])
                trials.append(int(parts[2]))
                windows.append(int(parts[3]))
                feats.append([float(v) for v in parts[4:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    if names is None or not feats:
        raise DataError(f"{path}: no feature rows found")
    return FeatureTable(
        subject=np.array(subjects, dtype=int),
        label=labels,
        trial=np.array(trials, dtype=int),
        window=np.array(windows, dtype=int),
        features=np.array(feats, dtype=float),
        feature_names=names,
    )


def table_to_dataset(table: FeatureTable) -> dataio.LabeledDataset:
    class_list = sorted(set(table.label), key=dataio.label_sort_key)
    return dataio.LabeledDataset(
        features=table.features, labels=list(table.label), class_list=class_list
    )


def _fit_one(train_table: FeatureTable, cfg: RunConfig) -> tuple[dict, dict]:
    """Fit scaler + classifier on one training table; returns payloads."""
    scaler = preprocess.fit_scaler(train_table.features)
    scaled = preprocess.apply_scaler(train_table.features, scaler)
    ds = dataio.LabeledDataset(
        features=scaled,
        labels=list(train_table.label),
        class_list=sorted(set(train_table.label), key=dataio.label_sort_key),
    )
    summary = {"class_counts": {str(lab): int(np.sum([l == lab for l in ds.labels]))
                                for lab in ds.class_list}}
    if cfg.classifier == "evm":
        model = evm.evm_fit(
            ds, tail_size=cfg.tail_size, metric=cfg.metric,
            reject_threshold=cfg.reject_threshold,
        )
        summary["extreme_vectors_before"] = model.n_vectors()
        if cfg.cover_threshold is not None:
            model = evm.evm_reduce(model, cfg.cover_threshold)
        summary["extreme_vectors_after"] = model.n_vectors()
        payload = evm.evm_to_payload(model)
    else:
        model = baselines.knn_fit(ds, k=cfg.knn_k, metric=cfg.metric)
        summary["knn_points"] = len(ds)
        payload = baselines.knn_to_payload(model)
    return {"scaler": scaler.to_dict(), "model": payload}, summary


def train_bundle(table: FeatureTable, cfg: RunConfig, path) -> dict:
    """Train on the configured train trials and write the model bundle."""
    mask = np.isin(table.trial, cfg.train_trials)
    if not mask.any():
        raise ConfigError(f"no rows in train trials {list(cfg.train_trials)}")
    train_table = table.select(mask)
    pipeline_meta = {
        "sample_rate": cfg.sample_rate,
        "window_len": cfg.window_len,
        "window_step": cfg.window_step,
        "trim_head": cfg.trim_head,
        "trim_tail": cfg.trim_tail,
        "ar_order": cfg.ar_order,
        "include_noise_var": cfg.include_noise_var,
        "feature_names": table.feature_names,
        "per_subject": cfg.per_subject,
    }
    if cfg.per_subject:
        fits = {}
        summary = {}
        for subj in sorted(set(train_table.subject.tolist())):
            sub_table = train_table.select(train_table.subject == subj)
            fits[str(subj)], summary[str(subj)] = _fit_one(sub_table, cfg)
        payload = {"per_subject": fits}
    else:
        fitted, summary = _fit_one(train_table, cfg)
        payload = {"pooled": fitted}
    modelio.save_bundle(
        path,
        classifier=cfg.classifier,
        payload=payload,
        filters=cfg.filters(),
        pipeline=pipeline_meta,
        config=cfg.to_dict(),
    )
    return summary


def _predict_with(fitted: dict, classifier: str, features: np.ndarray):
    scaler = preprocess.ScalerParams.from_dict(fitted["scaler"])
    scaled = preprocess.apply_scaler(features, scaler)
    if classifier == "evm":
        model = evm.evm_from_payload(fitted["model"])
        labels, _ = evm.evm_predict_batch(model, scaled)
    else:
        model = baselines.knn_from_payload(fitted["model"])
        labels = baselines.knn_predict_batch(model, scaled)
    return labels, model.class_list


def evaluate_bundle(bundle: dict, table: FeatureTable, cfg: RunConfig):
    """Apply a loaded bundle to the configured test trials.

    Returns (EvalReport, ConfusionMatrix).  With ``vote_per_trial`` the
    window predictions are majority-voted within each (subject, label,
    trial) group before scoring.
    """
    from . import evalkit

    mask = np.isin(table.trial, cfg.test_trials)
    if not mask.any():
        raise ConfigError(f"no rows in test trials {list(cfg.test_trials)}")
    test_table = table.select(mask)
    expected = bundle.get("pipeline", {}).get("feature_names")
    if expected is not None and list(expected) != list(table.feature_names):
        raise ConfigError(
            "feature columns do not match the bundle (different AR order, "
            "channel count, or noise-variance flag)"
        )
    payload = bundle["payload"]
    classifier = bundle["classifier"]
    if "per_subject" in payload:
        predicted: list = [None] * len(test_table)
        class_list = None
        for subj_key, fitted in payload["per_subject"].items():
            subj_mask = test_table.subject == int(subj_key)
            if not subj_mask.any():
                continue
            labels, class_list = _predict_with(
                fitted, classifier, test_table.features[subj_mask]
            )
            for pos, lab in zip(np.flatnonzero(subj_mask), labels):
                predicted[pos] = lab
        unmatched = [
            str(s) for s in sorted(set(test_table.subject.tolist()))
            if str(s) not in payload["per_subject"]
        ]
        if unmatched:
            raise ConfigError(f"bundle has no model for subjects {unmatched}")
    else:
        predicted, class_list = _predict_with(
            payload["pooled"], classifier, test_table.features
        )
    truth = list(test_table.label)
    if cfg.vote_per_trial:
        truth, predicted = _vote_per_trial(test_table, predicted, class_list)
    cm = evalkit.confuse(truth, predicted, class_list=class_list)
    return evalkit.metrics(cm), cm


def _vote_per_trial(table: FeatureTable, predicted: list, class_list: list):
    """Majority vote over the windows of each (subject, label, trial)."""
    groups: dict = {}
    for i in range(len(table)):
        key = (int(table.subject[i]), table.label[i], int(table.trial[i]))
        groups.setdefault(key, []).append(predicted[i])
    truth, voted = [], []
    index = {lab: c for c, lab in enumerate(class_list)}
    for key in sorted(groups, key=lambda k: (k[0], dataio.label_sort_key(k[1]), k[2])):
        votes = np.zeros(len(class_list), dtype=int)
        for p in groups[key]:
            if p is not None:
                votes[index[p]] += 1
        truth.append(key[1])
        if votes.sum() == 0:
            voted.append(None)
        else:
            voted.append(class_list[int(np.argmax(votes))])
    return truth, voted
