"""Versioned JSON bundle envelope shared by EVM and KNN models.

A bundle is self-contained for inference: besides the classifier payload it
carries the scaler, the filter chain, and the pipeline settings (window,
AR order, sample rate) used upstream.  Serialization is canonical (sorted
keys, shortest round-trip floats) so identical models produce identical
bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ConfigError, DataError

FORMAT_VERSION = 1
_REQUIRED = ("format_version", "classifier", "payload")


def save_bundle(path, classifier: str, payload: dict,
                scaler=None, filters=None, pipeline=None, config=None) -> None:
    if classifier not in ("evm", "knn"):
        raise ConfigError(f"unknown classifier kind {classifier!r}")
    bundle = {
        "format_version": FORMAT_VERSION,
        "classifier": classifier,
        "payload": payload,
        "scaler": scaler.to_dict() if hasattr(scaler, "to_dict") else scaler,
        "filters": (
            [f.to_dict() if hasattr(f, "to_dict") else f for f in filters]
            if filters is not None
            else None
        ),
        "pipeline": pipeline,
        "config": config,
    }
    text = json.dumps(bundle, indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")


def load_bundle(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"model bundle not found: {path}")
    try:
        bundle = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"model bundle {path} is corrupt: {exc}") from exc
    if not isinstance(bundle, dict):
        raise DataError(f"model bundle {path} is not a JSON object")
    for key in _REQUIRED:
        if key not in bundle:
            raise DataError(f"model bundle {path} is missing field {key!r}")
    if bundle["format_version"] != FORMAT_VERSION:
        raise DataError(
            f"model bundle {path} has format_version "
            f"{bundle['format_version']!r}, expected {FORMAT_VERSION}"
        )
    return bundle
