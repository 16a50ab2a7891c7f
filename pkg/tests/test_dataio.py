import json
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emgevm.dataio import (
    Frame,
    GESTURE_LABELS,
    LabeledDataset,
    Manifest,
    ManifestEntry,
    RawRecording,
    gen_ar_process,
    gen_gaussian_blobs,
    load_dataset,
    load_manifest,
    scan_default_layout,
    split_by_trial,
    trim_signal,
    window_signal,
    write_manifest,
)
from emgevm.errors import ConfigError, DataError

from oracles import nearest_center_labels


# ---------------------------------------------------------------- windowing

def test_window_exact_tiling():
    frames = window_signal(np.arange(10.0), win_len=5, step=5)
    assert len(frames) == 2
    assert [f.origin.start for f in frames] == [0, 5]


def test_window_overlapping():
    frames = window_signal(np.arange(10.0), win_len=4, step=3)
    assert len(frames) == 3
    assert [f.origin.start for f in frames] == [0, 3, 6]


def test_window_short_signal_empty():
    assert window_signal(np.arange(3.0), win_len=5, step=1) == []


def test_window_bad_args():
    with pytest.raises(ConfigError):
        window_signal(np.arange(10.0), win_len=0, step=1)
    with pytest.raises(ConfigError):
        window_signal(np.arange(10.0), win_len=5, step=0)


@settings(max_examples=200, deadline=None)
@given(
    n=st.integers(1, 1000),
    win_len=st.integers(1, 1000),
    step=st.integers(1, 1000),
)
def test_window_count_formula(n, win_len, step):
    frames = window_signal(np.zeros(n), win_len=win_len, step=step)
    expected = (n - win_len) // step + 1 if n >= win_len else 0
    assert len(frames) == expected
    assert all(len(f) == win_len for f in frames)
    assert all(f.origin.start + win_len <= n for f in frames)


def test_trim_signal():
    x = np.arange(100.0)
    t = trim_signal(x, 0.1, 0.1)
    assert t[0] == 10.0 and t[-1] == 89.0
    with pytest.raises(ConfigError):
        trim_signal(x, 0.6, 0.5)


# ------------------------------------------------------------------- splits

def _rec(subject, label, trial):
    return RawRecording(
        subject_id=subject,
        gesture_label=label,
        trial_index=trial,
        channels=np.zeros((2, 8)) + 1.0,
    )


def _all_recordings():
    return [
        _rec(s, lab, t)
        for s in range(1, 9)
        for lab in GESTURE_LABELS
        for t in range(1, 7)
    ]


def test_split_by_trial_counts():
    recs = _all_recordings()
    train, test = split_by_trial(recs, {1, 2, 3, 4}, {5, 6})
    assert len(train) == 320 and len(test) == 160


def test_split_overlap_rejected():
    with pytest.raises(ConfigError):
        split_by_trial([_rec(1, "T", 1)], {1}, {1})


def test_split_exhaustive_and_preserving():
    recs = _all_recordings()
    train, test = split_by_trial(recs, set(range(1, 7)), set())
    assert len(train) == 480 and len(test) == 0
    train, test = split_by_trial(recs, {1, 2}, {3, 4, 5, 6})
    assert len(train) + len(test) == len(recs)


# ------------------------------------------------------------------ loading

def _write_csv(path, columns):
    rows = np.column_stack(columns)
    with open(path, "w") as fh:
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _make_dataset(root, subjects=(1,), labels=("T", "I"), trials=(1, 2), n=32):
    entries = []
    rng = np.random.default_rng(0)
    for s in subjects:
        d = root / f"s{s}"
        d.mkdir(parents=True, exist_ok=True)
        for lab in labels:
            for t in trials:
                p = d / f"{lab}-{t}.csv"
                _write_csv(p, [rng.standard_normal(n), rng.standard_normal(n)])
                entries.append(
                    ManifestEntry(subject=s, label=lab, trial=t,
                                  path=str(p.relative_to(root)),
                                  channel_columns=[0, 1])
                )
    return Manifest(entries=entries, sample_rate=1000.0)


def test_load_dataset_roundtrip(tmp_path):
    manifest = _make_dataset(tmp_path)
    recs = load_dataset(tmp_path, manifest)
    assert len(recs) == 4
    assert all(r.n_channels == 2 and r.n_samples == 32 for r in recs)
    assert all(r.sample_rate == 1000.0 for r in recs)


def test_load_dataset_order_independent(tmp_path):
    manifest = _make_dataset(tmp_path, labels=("T", "I", "HC"), trials=(1, 2, 3))
    shuffled = Manifest(
        entries=random.Random(7).sample(manifest.entries, len(manifest.entries)),
        sample_rate=manifest.sample_rate,
    )
    a = load_dataset(tmp_path, manifest)
    b = load_dataset(tmp_path, shuffled)
    keys_a = [(r.subject_id, r.gesture_label, r.trial_index) for r in a]
    keys_b = [(r.subject_id, r.gesture_label, r.trial_index) for r in b]
    assert keys_a == keys_b
    for ra, rb in zip(a, b):
        assert np.array_equal(ra.channels, rb.channels)


def test_load_missing_file_names_tuple(tmp_path):
    manifest = _make_dataset(tmp_path)
    (tmp_path / "s1" / "T-1.csv").unlink()
    with pytest.raises(DataError, match=r"subject=1.*label=T.*trial=1"):
        load_dataset(tmp_path, manifest)


def test_load_malformed_number_names_line(tmp_path):
    manifest = _make_dataset(tmp_path)
    target = tmp_path / "s1" / "T-1.csv"
    lines = target.read_text().splitlines()
    lines[4] = "0.5,oops"
    target.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match=r"T-1\.csv:5.*oops"):
        load_dataset(tmp_path, manifest)


def test_load_ragged_rows_structural_error(tmp_path):
    manifest = _make_dataset(tmp_path)
    target = tmp_path / "s1" / "I-2.csv"
    lines = target.read_text().splitlines()
    lines[3] = "0.25"
    target.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match=r"I-2\.csv"):
        load_dataset(tmp_path, manifest)


def test_empty_directory_warns_not_crashes(tmp_path):
    with pytest.warns(UserWarning):
        manifest = scan_default_layout(tmp_path)
    assert manifest.entries == []


def test_scan_default_layout(tmp_path):
    _make_dataset(tmp_path, subjects=(1, 2), labels=("T", "T-I"), trials=(1,))
    manifest = scan_default_layout(tmp_path)
    found = {(e.subject, e.label, e.trial) for e in manifest.entries}
    assert found == {(1, "T", 1), (1, "T-I", 1), (2, "T", 1), (2, "T-I", 1)}


def test_manifest_json_roundtrip(tmp_path):
    manifest = _make_dataset(tmp_path)
    path = tmp_path / "manifest.json"
    write_manifest(manifest, path)
    loaded = load_manifest(path)
    assert loaded.sample_rate == manifest.sample_rate
    assert [
        (e.subject, e.label, e.trial, e.path, e.channel_columns)
        for e in loaded.entries
    ] == [
        (e.subject, e.label, e.trial, e.path, e.channel_columns)
        for e in manifest.sorted_entries()
    ]


def test_manifest_rejects_garbage(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{not json")
    with pytest.raises(DataError):
        load_manifest(p)
    p.write_text(json.dumps({"entries": [{"subject": 1}]}))
    with pytest.raises(DataError, match="entry 0"):
        load_manifest(p)


# --------------------------------------------------------------- generators

def test_ar0_is_white_noise():
    v = gen_ar_process([], 1.0, 1000, seed=0)
    r0 = float(np.dot(v, v) / v.size)
    r1 = float(np.dot(v[:-1], v[1:]) / v.size)
    assert abs(r1 / r0) < 5 / np.sqrt(1000)


def test_generator_deterministic():
    a = gen_ar_process([-0.5], 1.0, 500, seed=123)
    b = gen_ar_process([-0.5], 1.0, 500, seed=123)
    c = gen_ar_process([-0.5], 1.0, 500, seed=124)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_ar1_autocorrelation_matches_theory():
    # AR(1) with pole 0.5 has rho(1) = 0.5.
    v = gen_ar_process([-0.5], 1.0, 100000, seed=11)
    r0 = float(np.dot(v, v))
    r1 = float(np.dot(v[:-1], v[1:]))
    assert abs(r1 / r0 - 0.5) < 0.02


def test_blob_counts_and_degenerate_spread():
    ds = gen_gaussian_blobs([[0, 0], [10, 10]], std=1.0, per_class=50, seed=0)
    assert len(ds) == 100
    assert ds.class_list == [0, 1]
    ds0 = gen_gaussian_blobs([[3, 4]], std=0.0, per_class=5, seed=0)
    assert np.allclose(ds0.features, [3, 4])


def test_blob_nearest_center_labels():
    centers = [[0.0, 0.0], [10.0, 10.0]]
    ds = gen_gaussian_blobs(centers, std=0.5, per_class=50, seed=42)
    assert nearest_center_labels(ds.features, centers) == ds.labels


def test_blobs_pure_function_of_seed():
    a = gen_gaussian_blobs([[0, 0], [5, 5]], 1.0, 10, seed=9)
    b = gen_gaussian_blobs([[0, 0], [5, 5]], 1.0, 10, seed=9)
    assert np.array_equal(a.features, b.features)
    assert a.labels == b.labels


# -------------------------------------------------------------------- types

def test_recording_invariants():
    with pytest.raises(DataError):
        _rec(1, "XX", 1)
    with pytest.raises(DataError):
        _rec(1, "T", 7)


def test_labeled_dataset_invariants():
    with pytest.raises(ConfigError):
        LabeledDataset(features=np.zeros((2, 3)), labels=["A"])
    with pytest.raises(ConfigError):
        LabeledDataset(
            features=np.zeros((2, 3)), labels=["A", "B"], class_list=["A"]
        )


def test_frame_length():
    f = Frame(samples=np.zeros(7))
    assert len(f) == 7
