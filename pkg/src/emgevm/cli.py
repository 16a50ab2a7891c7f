"""Command-line interface.

Subcommands: synth, extract, train, eval, sweep, psd.  Exit codes: 0 on
success, 2 for configuration errors, 3 for data errors, 4 for numeric
errors.  All outputs are byte-deterministic for a fixed (config, dataset).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import arburg, dataio, evalkit, modelio, pipeline
from .errors import ConfigError, DataError, EmgEvmError


def _add_config_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--root", dest="dataset_root", help="dataset root directory")
    p.add_argument("--manifest", help="manifest JSON path (default: <root>/manifest.json or scan)")
    p.add_argument("--window-len", dest="window_len", type=int)
    p.add_argument("--window-step", dest="window_step", type=int)
    p.add_argument("--trim-head", dest="trim_head", type=float)
    p.add_argument("--trim-tail", dest="trim_tail", type=float)
    p.add_argument("--no-filter", dest="filter_enabled", action="store_const", const=False)
    p.add_argument("--notch-freq", dest="notch_freq", type=float)
    p.add_argument("--notch-q", dest="notch_q", type=float)
    p.add_argument("--band-low", dest="band_low", type=float)
    p.add_argument("--band-high", dest="band_high", type=float)
    p.add_argument("--filter-order", dest="filter_order", type=int)
    p.add_argument("--order", dest="ar_order", type=int, help="AR model order p")
    p.add_argument("--include-noise-var", dest="include_noise_var",
                   action="store_const", const=True)
    p.add_argument("--classifier", choices=["evm", "knn"])
    p.add_argument("--metric", choices=["cosine", "euclidean"])
    p.add_argument("--tail-size", dest="tail_size", type=int)
    p.add_argument("--cover-threshold", dest="cover_threshold", type=float)
    p.add_argument("--no-reduce", dest="cover_threshold",
                   action="store_const", const=-1.0,
                   help="skip model reduction (keep all extreme vectors)")
    p.add_argument("--reject-threshold", dest="reject_threshold", type=float)
    p.add_argument("--knn-k", dest="knn_k", type=int)
    p.add_argument("--train-trials", dest="train_trials",
                   help="comma-separated trial indices, e.g. 1,2,3,4")
    p.add_argument("--test-trials", dest="test_trials")
    p.add_argument("--seed", type=int)
    p.add_argument("--vote-per-trial", dest="vote_per_trial",
                   action="store_const", const=True)
    p.add_argument("--per-subject", dest="per_subject", action="store_const", const=True)
    p.add_argument("--jobs", type=int, help="worker threads for extraction")


def _parse_trials(text):
    if text is None:
        return None
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"bad trial list {text!r}: {exc}") from exc


def _config_from(ns: argparse.Namespace) -> pipeline.RunConfig:
    keys = set(pipeline.RunConfig.__dataclass_fields__)
    overrides = {k: v for k, v in vars(ns).items() if k in keys}
    overrides["train_trials"] = _parse_trials(getattr(ns, "train_trials", None))
    overrides["test_trials"] = _parse_trials(getattr(ns, "test_trials", None))
    if overrides.get("cover_threshold") == -1.0:  # --no-reduce sentinel
        cfg = pipeline.build_config(getattr(ns, "config", None), **{
            k: v for k, v in overrides.items() if k != "cover_threshold"
        })
        cfg.cover_threshold = None
        return cfg
    return pipeline.build_config(getattr(ns, "config", None), **overrides)


def _resolve_dataset(cfg: pipeline.RunConfig):
    """Load the manifest and adopt its sample rate into the config."""
    from dataclasses import replace

    manifest = pipeline.resolve_manifest(cfg)
    return replace(cfg, sample_rate=manifest.sample_rate), manifest


def _load_table(ns, cfg: pipeline.RunConfig):
    if getattr(ns, "features", None):
        return pipeline.read_features_csv(ns.features), cfg
    if cfg.dataset_root is None:
        raise ConfigError("either --features or --root is required")
    cfg, manifest = _resolve_dataset(cfg)
    return pipeline.extract_table(cfg, manifest), cfg


def cmd_extract(ns) -> int:
    cfg, manifest = _resolve_dataset(_config_from(ns))
    table = pipeline.extract_table(cfg, manifest)
    pipeline.write_features_csv(table, ns.out, config_echo=cfg.echo())
    print(f"wrote {len(table)} feature rows x {len(table.feature_names)} features to {ns.out}")
    return 0


def cmd_train(ns) -> int:
    cfg = _config_from(ns)
    table, cfg = _load_table(ns, cfg)
    summary = pipeline.train_bundle(table, cfg, ns.out)
    print(f"trained {cfg.classifier} model -> {ns.out}")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_eval(ns) -> int:
    cfg = _config_from(ns)
    bundle = modelio.load_bundle(ns.bundle)
    table, cfg = _load_table(ns, cfg)
    report, cm = pipeline.evaluate_bundle(bundle, table, cfg)
    name = bundle["classifier"]
    named = [(name, report)]
    print(evalkit.render_report(named, "text", include_reference=ns.with_reference))
    out_dir = Path(ns.out_dir) if ns.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    json_path = ns.json or (out_dir / "report.json" if out_dir else None)
    if json_path:
        doc = json.loads(evalkit.render_report(named, "json",
                                               include_reference=ns.with_reference))
        doc["config"] = cfg.to_dict()
        doc["confusion"] = {
            "class_list": [str(c) for c in cm.class_list],
            "counts": cm.counts.tolist(),
            "unknown": cm.unknown.tolist(),
        }
        Path(json_path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    csv_path = ns.per_class_csv or (out_dir / "per_class_accuracy.csv" if out_dir else None)
    if csv_path:
        evalkit.write_per_class_csv(report, csv_path, header_comment=cfg.echo())
    fig_dir = Path(ns.fig_dir) if ns.fig_dir else out_dir
    if fig_dir:
        from . import figures

        fig_dir.mkdir(parents=True, exist_ok=True)
        figures.plot_confusion_matrix(cm, fig_dir / f"confusion_{name}.png")
        figures.plot_per_class_accuracy(named, fig_dir / "per_class_accuracy.png")
    return 0


def cmd_sweep(ns) -> int:
    cfg = _config_from(ns)
    cfg.require_disjoint_trials()
    try:
        values = [float(v) for v in ns.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad sweep values {ns.values!r}: {exc}") from exc
    if not values:
        raise ConfigError("sweep needs at least one value")
    param = ns.param
    rows = []
    base_table = None
    if param != "p":
        base_table, cfg = _load_table(ns, cfg)
    elif cfg.dataset_root is not None:
        cfg, _ = _resolve_dataset(cfg)
    for value in values:
        from dataclasses import replace

        if param == "p":
            run_cfg = replace(cfg, ar_order=int(value))
            table = pipeline.extract_table(run_cfg)
        elif param == "k":
            run_cfg = replace(cfg, classifier="knn", knn_k=int(value))
            table = base_table
        elif param == "tau":
            run_cfg = replace(cfg, classifier="evm", tail_size=int(value))
            table = base_table
        else:  # cover
            run_cfg = replace(cfg, classifier="evm", cover_threshold=float(value))
            table = base_table
        bundle_path = Path(ns.out).with_suffix(f".{param}_{value:g}.bundle.json")
        summary = pipeline.train_bundle(table, run_cfg, bundle_path)
        bundle = modelio.load_bundle(bundle_path)
        report, _ = pipeline.evaluate_bundle(bundle, table, run_cfg)
        ev_count = summary.get("extreme_vectors_after", "")
        rows.append((value, report.accuracy, ev_count))
        bundle_path.unlink()
    lines = [f"# config: {cfg.echo()}", f"{param},accuracy_pct,extreme_vectors"]
    lines += [f"{v:g},{acc!r},{ev}" for v, acc, ev in rows]
    Path(ns.out).write_text("\n".join(lines) + "\n")
    print(f"swept {param} over {len(rows)} values -> {ns.out}")
    if ns.fig:
        from . import figures

        figures.plot_sweep([r[0] for r in rows], [r[1] for r in rows], param, ns.fig)
    return 0


def _psd_echo(ns) -> str:
    return json.dumps(
        {"column": ns.column, "grid": ns.grid, "order": ns.order,
         "sample_rate": ns.sample_rate},
        sort_keys=True,
    )


def cmd_psd(ns) -> int:
    path = Path(ns.input)
    if not path.exists():
        raise DataError(f"input frame file not found: {path}")
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except ValueError as exc:
        raise DataError(f"{path}: could not parse CSV: {exc}") from exc
    if ns.column >= data.shape[1]:
        raise DataError(f"{path}: column {ns.column} out of range ({data.shape[1]} columns)")
    frame = data[:, ns.column]
    model = arburg.reflection_to_ar(arburg.burg(frame, ns.order))
    grid = arburg.default_freq_grid(ns.grid)
    power = arburg.ar_psd(model, grid)
    freq_hz = grid * ns.sample_rate
    lines = [f"# config: {_psd_echo(ns)}", "frequency_hz,power"]
    lines += [f"{float(f)!r},{float(p)!r}" for f, p in zip(freq_hz, power)]
    Path(ns.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {len(power)}-point spectrum (order {ns.order}) to {ns.out}")
    if ns.fig:
        from . import figures

        figures.plot_psd(freq_hz, power, ns.fig)
    return 0


# AR resonance templates for the synthetic dataset: each class gets a pair
# of pole angles; channel 1 is slightly detuned against channel 0.
def _synth_ar_coeffs(class_index: int, channel: int) -> np.ndarray:
    theta = np.pi * (0.06 + 0.08 * class_index) + channel * np.pi * 0.015
    theta2 = theta + 0.9
    poles = []
    for radius, angle in ((0.92, theta), (0.85, theta2)):
        poles.extend([radius * np.exp(1j * angle), radius * np.exp(-1j * angle)])
    a = np.poly(poles).real  # leading 1, then a_1..a_4
    return a[1:]


def cmd_synth(ns) -> int:
    root = Path(ns.out)
    root.mkdir(parents=True, exist_ok=True)
    labels = list(dataio.GESTURE_LABELS[: ns.classes])
    n = int(ns.seconds * ns.sample_rate)
    entries = []
    for subject in range(1, ns.subjects + 1):
        subject_dir = root / f"s{subject}"
        subject_dir.mkdir(exist_ok=True)
        for ci, label in enumerate(labels):
            for trial in range(1, ns.trials + 1):
                channels = []
                for ch in range(2):
                    seed = np.random.SeedSequence(
                        entropy=[ns.seed, subject, ci, trial, ch]
                    )
                    x = dataio.gen_ar_process(
                        _synth_ar_coeffs(ci, ch), 1.0, n, seed
                    )
                    rest = int(0.08 * n)  # quiet rest margins around the gesture
                    x[:rest] *= 0.05
                    x[n - rest:] *= 0.05
                    channels.append(x)
                fname = f"{label}-{trial}.csv"
                out = subject_dir / fname
                cols = np.column_stack(channels)
                with open(out, "w") as fh:
                    for row in cols:
                        fh.write(f"{float(row[0])!r},{float(row[1])!r}\n")
                entries.append(
                    dataio.ManifestEntry(
                        subject=subject, label=label, trial=trial,
                        path=f"s{subject}/{fname}", channel_columns=[0, 1],
                    )
                )
    manifest = dataio.Manifest(entries=entries, sample_rate=float(ns.sample_rate))
    dataio.write_manifest(manifest, root / "manifest.json")
    print(f"wrote {len(entries)} synthetic recordings under {root}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emgevm",
        description="EMG gesture classification from Burg reflection coefficients "
                    "with an Extreme Value Machine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract window features to CSV")
    _add_config_options(p)
    p.add_argument("--out", required=True, help="output features CSV")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="fit scaler + classifier, write model bundle")
    _add_config_options(p)
    p.add_argument("--features", help="features CSV from `extract` (else extract from --root)")
    p.add_argument("--out", required=True, help="output model bundle JSON")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model bundle on the test trials")
    _add_config_options(p)
    p.add_argument("--bundle", required=True, help="model bundle JSON from `train`")
    p.add_argument("--features", help="features CSV from `extract`")
    p.add_argument("--json", help="write the full JSON report here")
    p.add_argument("--per-class-csv", dest="per_class_csv",
                   help="write per-class accuracy CSV here")
    p.add_argument("--out-dir", dest="out_dir",
                   help="write report.json, per-class CSV, and figures here")
    p.add_argument("--fig-dir", dest="fig_dir", help="write figures here")
    p.add_argument("--with-reference", dest="with_reference", action="store_true",
                   help="append reference classifier results to the report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="train+eval across one hyperparameter")
    _add_config_options(p)
    p.add_argument("--features", help="features CSV (ignored when sweeping p)")
    p.add_argument("--param", required=True, choices=["p", "k", "tau", "cover"])
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", required=True, help="output CSV of (value, accuracy)")
    p.add_argument("--fig", help="optional accuracy-vs-value plot")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("psd", help="parametric spectrum of one frame CSV")
    p.add_argument("--input", required=True, help="CSV with one sample per row")
    p.add_argument("--column", type=int, default=0)
    p.add_argument("--order", type=int, default=10)
    p.add_argument("--sample-rate", dest="sample_rate", type=float,
                   default=dataio.DEFAULT_SAMPLE_RATE)
    p.add_argument("--grid", type=int, default=512, help="frequency grid size")
    p.add_argument("--out", required=True, help="output CSV (frequency_hz, power)")
    p.add_argument("--fig", help="optional spectrum plot")
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("synth", help="emit a synthetic dataset with manifest")
    p.add_argument("--out", required=True, help="output dataset root")
    p.add_argument("--subjects", type=int, default=2)
    p.add_argument("--trials", type=int, default=6)
    p.add_argument("--classes", type=int, default=10, choices=range(2, 11),
                   metavar="2..10")
    p.add_argument("--seconds", type=float, default=5.0)
    p.add_argument("--sample-rate", dest="sample_rate", type=float,
                   default=dataio.DEFAULT_SAMPLE_RATE)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except EmgEvmError as exc:
        print(f"ERROR[{exc.category}]: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
