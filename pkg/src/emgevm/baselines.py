"""Brute-force k-nearest-neighbors baseline.

Deterministic tie handling: equidistant neighbors are taken in training
order, and tied votes go to the class earliest in the class list.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataio import LabeledDataset
from .errors import ConfigError, DataError
from .evm import METRICS, COSINE, pairwise_distances

_CHUNK = 256


@dataclass
class KnnModel:
    points: np.ndarray
    labels: list
    class_list: list
    k: int = 5
    metric: str = COSINE

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if not 1 <= self.k <= self.points.shape[0]:
            raise ConfigError(
                f"k must lie in 1..{self.points.shape[0]}, got {self.k}"
            )
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}")


def knn_fit(train: LabeledDataset, k: int = 5, metric: str = COSINE) -> KnnModel:
    """Store the training set verbatim."""
    return KnnModel(
        points=train.features.copy(),
        labels=list(train.labels),
        class_list=list(train.class_list),
        k=k,
        metric=metric,
    )


def knn_predict_batch(model: KnnModel, queries) -> list:
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if queries.shape[1] != model.points.shape[1]:
        raise ConfigError(
            f"query dimension {queries.shape[1]} does not match "
            f"model dimension {model.points.shape[1]}"
        )
    label_idx = np.array([model.class_list.index(lab) for lab in model.labels])
    n_classes = len(model.class_list)
    order_tiebreak = np.arange(model.points.shape[0])
    out = []
    for start in range(0, queries.shape[0], _CHUNK):
        block = pairwise_distances(
            queries[start : start + _CHUNK], model.points, model.metric
        )
        for row in block:
            nearest = np.lexsort((order_tiebreak, row))[: model.k]
            votes = np.bincount(label_idx[nearest], minlength=n_classes)
            out.append(model.class_list[int(np.argmax(votes))])
    return out


def knn_predict(model: KnnModel, query):
    """Majority label among the k nearest training points."""
    return knn_predict_batch(model, np.atleast_2d(query))[0]


def knn_to_payload(model: KnnModel) -> dict:
    return {
        "k": model.k,
        "metric": model.metric,
        "class_list": list(model.class_list),
        "points": model.points.tolist(),
        "labels": list(model.labels),
    }


def knn_from_payload(payload: dict) -> KnnModel:
    try:
        return KnnModel(
            points=np.asarray(payload["points"], dtype=float),
            labels=list(payload["labels"]),
            class_list=list(payload["class_list"]),
            k=payload["k"],
            metric=payload["metric"],
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"model payload missing or malformed field: {exc}") from exc


def save_knn_model(model: KnnModel, path, scaler=None, filters=None, pipeline=None):
    from . import modelio

    modelio.save_bundle(
        path,
        classifier="knn",
        payload=knn_to_payload(model),
        scaler=scaler,
        filters=filters,
        pipeline=pipeline,
    )


def load_knn_model(path) -> KnnModel:
    from . import modelio

    bundle = modelio.load_bundle(path)
    if bundle["classifier"] != "knn":
        raise DataError(f"bundle holds a {bundle['classifier']!r} model, not KNN")
    return knn_from_payload(bundle["payload"])
