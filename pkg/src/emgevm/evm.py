"""Extreme Value Machine: margin Weibull fitting, reduction, prediction.

Each retained training point (an "extreme vector") carries a two-parameter
Weibull fitted to half the distances to its nearest rival-class points.
A query is scored per class by the maximum probability of sample inclusion

    psi(d) = exp(-(d / scale)^shape)

over that class's extreme vectors, and assigned to the highest-scoring
class (or rejected as unknown below the reject threshold).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataio import LabeledDataset
from .errors import ConfigError, DataError, NumericError

EUCLIDEAN = "euclidean"
COSINE = "cosine"
METRICS = (COSINE, EUCLIDEAN)

# Shape used when a point's margin tail has fewer than two distinct values
# (e.g. tail_size=1), where the Weibull likelihood is unbounded.  The fit
# degenerates toward a hard ball of radius equal to the common margin; a
# steep finite shape keeps psi well defined without overflow.
DEGENERATE_TAIL_SHAPE = 32.0

# Margins below this are treated as exact duplicates across classes; such
# points cannot anchor a margin distribution and are skipped with a warning.
_ZERO_MARGIN = 1e-12

# Cosine similarities within this distance of 1 are snapped to distance 0 so
# identical directions score psi = 1 exactly despite rounding.
_COSINE_SNAP = 1e-15

_CHUNK = 512


@dataclass
class WeibullParams:
    """Two-parameter Weibull over margin distances (shift fixed at zero)."""

    shape: float
    scale: float
    shift: float = 0.0

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0:
            raise ConfigError("Weibull shape and scale must be positive")
        if self.shift != 0.0:
            raise ConfigError("Weibull shift is fixed at zero")


@dataclass
class ExtremeVector:
    """A retained training point plus its fitted margin distribution."""

    anchor: np.ndarray
    weibull: WeibullParams
    class_label: object

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=float)


@dataclass
class EvmModel:
    class_list: list
    vectors: dict = field(default_factory=dict)  # label -> list[ExtremeVector]
    metric: str = COSINE
    tail_size: int = 27
    cover_threshold: float | None = None  # None until evm_reduce is applied
    reject_threshold: float = 0.0

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}")
        if self.tail_size < 1:
            raise ConfigError("tail_size must be >= 1")
        if not 0.0 <= self.reject_threshold <= 1.0:
            raise ConfigError("reject_threshold must lie in [0, 1]")
        if self.cover_threshold is not None and not 0.0 < self.cover_threshold <= 1.0:
            raise ConfigError("cover_threshold must lie in (0, 1]")

    def n_vectors(self) -> int:
        return sum(len(v) for v in self.vectors.values())

    def require_nonempty_classes(self) -> None:
        empty = [lab for lab in self.class_list if not self.vectors.get(lab)]
        if empty:
            raise ConfigError(
                f"classes without extreme vectors: {[str(e) for e in empty]}"
            )


def distance(a, b, metric: str = COSINE) -> float:
    """Distance between two feature vectors under the chosen metric.

    Cosine distance is ``1 - cos(a, b)`` clamped to [0, 2]; both vectors
    must be non-zero.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ConfigError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if metric == EUCLIDEAN:
        return float(np.linalg.norm(a - b))
    if metric == COSINE:
        na = np.linalg.norm(a)
        nb = np.linalg.norm(b)
        if na == 0.0 or nb == 0.0:
            raise NumericError("cosine distance undefined for a zero vector")
        d = 1.0 - float(np.dot(a, b) / (na * nb))
        if d < _COSINE_SNAP:
            return 0.0
        return float(min(d, 2.0))
    raise ConfigError(f"metric must be one of {METRICS}")


def pairwise_distances(x, y, metric: str = COSINE) -> np.ndarray:
    """Distance matrix between the rows of two feature arrays."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[1] != y.shape[1]:
        raise ConfigError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if metric == EUCLIDEAN:
        return _euclidean_pairwise(x, y)
    if metric == COSINE:
        return _cosine_pairwise(x, y)
    raise ConfigError(f"metric must be one of {METRICS}")


def _euclidean_pairwise(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    sx = (x * x).sum(axis=1)
    sy = (y * y).sum(axis=1)
    sq = sx[:, None] + sy[None, :] - 2.0 * (x @ y.T)
    np.maximum(sq, 0.0, out=sq)
    # The expansion loses precision for nearly coincident rows; recompute
    # those few pairs directly so exact duplicates give distance 0.
    tiny = np.argwhere(sq <= 1e-9 * (sx[:, None] + sy[None, :]))
    if tiny.size:
        diff = x[tiny[:, 0]] - y[tiny[:, 1]]
        sq[tiny[:, 0], tiny[:, 1]] = (diff * diff).sum(axis=1)
    return np.sqrt(sq)


def _cosine_pairwise(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    nx = np.linalg.norm(x, axis=1)
    ny = np.linalg.norm(y, axis=1)
    if np.any(nx == 0.0) or np.any(ny == 0.0):
        raise NumericError("cosine distance undefined for a zero vector")
    d = 1.0 - (x / nx[:, None]) @ (y / ny[:, None]).T
    d[d < _COSINE_SNAP] = 0.0
    np.clip(d, 0.0, 2.0, out=d)
    return d


def inclusion_probability(d, params: WeibullParams):
    """Weibull probability of sample inclusion at distance(s) ``d``."""
    d = np.asarray(d, dtype=float)
    with np.errstate(over="ignore"):
        psi = np.exp(-((d / params.scale) ** params.shape))
    return psi if psi.ndim else float(psi)


def psi(ev: ExtremeVector, query, metric: str = COSINE) -> float:
    """Probability that ``query`` belongs inside the extreme vector's region."""
    return inclusion_probability(distance(ev.anchor, query, metric), ev.weibull)


def weibull_fit(samples, max_iter: int = 100, tol: float = 1e-9) -> WeibullParams:
    """Maximum-likelihood two-parameter Weibull fit.

    Solves the one-dimensional profile-likelihood equation in the shape by
    damped Newton iteration (halving steps that overshoot or leave the
    domain), then recovers the scale in closed form as
    ``mean(x^shape)^(1/shape)``.  Samples are pre-scaled by their geometric
    mean for numerical range; the result is scale-equivariant so this does
    not change the estimate.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ConfigError(f"need at least 2 samples, got {x.size}")
    if np.any(x <= 0):
        raise ConfigError("Weibull samples must be strictly positive")
    if np.ptp(x) == 0.0:
        raise NumericError("all samples equal: Weibull fit is degenerate")

    ln_x = np.log(x)
    center = float(ln_x.mean())
    ln_y = ln_x - center  # rescale by the geometric mean

    def profile(kappa: float) -> float:
        w = np.exp(kappa * ln_y)
        return float((w * ln_y).sum() / w.sum() - 1.0 / kappa)

    sigma = float(ln_y.std())
    kappa = (math.pi / math.sqrt(6.0)) / sigma
    g = profile(kappa)
    trace = [kappa]
    for _ in range(max_iter):
        w = np.exp(kappa * ln_y)
        s0 = float(w.sum())
        s1 = float((w * ln_y).sum())
        s2 = float((w * ln_y * ln_y).sum())
        gprime = (s2 / s0 - (s1 / s0) ** 2) + 1.0 / (kappa * kappa)
        step = g / gprime
        new_kappa = kappa - step
        halvings = 0
        while halvings < 60:
            if new_kappa > 0:
                g_new = profile(new_kappa)
                if abs(g_new) <= abs(g) or abs(new_kappa - kappa) < tol:
                    break
            step *= 0.5
            new_kappa = kappa - step
            halvings += 1
        else:
            raise NumericError(
                f"Weibull fit step damping failed; shape trace: {trace}"
            )
        converged = abs(new_kappa - kappa) < tol
        kappa = new_kappa
        g = profile(kappa)
        trace.append(kappa)
        if converged:
            scale_y = float(np.exp(kappa * ln_y).mean() ** (1.0 / kappa))
            return WeibullParams(shape=kappa, scale=scale_y * math.exp(center))
    raise NumericError(
        f"Weibull fit did not converge in {max_iter} iterations; "
        f"shape trace: {trace[:5]}...{trace[-3:]}"
    )


def _fit_tail(margins: np.ndarray) -> WeibullParams | None:
    """Fit one point's margin tail; None means the point must be skipped."""
    if np.any(margins < _ZERO_MARGIN):
        return None  # duplicate across classes
    if margins.size < 2 or np.ptp(margins) == 0.0:
        return WeibullParams(shape=DEGENERATE_TAIL_SHAPE, scale=float(margins.max()))
    try:
        return weibull_fit(margins)
    except NumericError:
        return None


def evm_fit(
    train: LabeledDataset,
    tail_size: int = 27,
    metric: str = COSINE,
    reject_threshold: float = 0.0,
) -> EvmModel:
    """Fit one candidate extreme vector per training point.

    For each point, the ``tail_size`` smallest distances to rival-class
    points (all of them, if fewer exist) are halved to form the margin
    sample, and a Weibull is fitted on it.  Points whose tail is degenerate
    (e.g. duplicated across classes) are skipped with a warning.
    """
    if tail_size < 1:
        raise ConfigError("tail_size must be >= 1")
    if len(train.class_list) < 2:
        raise ConfigError("EVM training needs at least 2 classes")
    x = train.features
    n = x.shape[0]
    label_idx = np.array([train.class_list.index(lab) for lab in train.labels])
    vectors: dict = {lab: [] for lab in train.class_list}
    skipped = 0
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        block = pairwise_distances(x[start:stop], x, metric)
        same = label_idx[start:stop, None] == label_idx[None, :]
        block[same] = np.inf
        for row in range(stop - start):
            i = start + row
            dists = block[row]
            n_neg = int(np.isfinite(dists).sum())
            tau = min(tail_size, n_neg)
            tail = np.sort(np.partition(dists, tau - 1)[:tau])
            params = _fit_tail(tail / 2.0)
            if params is None:
                skipped += 1
                continue
            vectors[train.labels[i]].append(
                ExtremeVector(anchor=x[i].copy(), weibull=params,
                              class_label=train.labels[i])
            )
    if skipped:
        warnings.warn(f"skipped {skipped} training point(s) with degenerate margins")
    model = EvmModel(
        class_list=list(train.class_list),
        vectors=vectors,
        metric=metric,
        tail_size=tail_size,
        reject_threshold=reject_threshold,
    )
    empty = [lab for lab in model.class_list if not vectors[lab]]
    if empty:
        raise NumericError(
            f"no usable extreme vectors for classes {[str(e) for e in empty]}"
        )
    return model


def evm_reduce(model: EvmModel, cover_threshold: float) -> EvmModel:
    """Greedy per-class set cover over the probability-of-inclusion matrix.

    Vector i covers same-class point j iff ``psi_i(x_j) >= cover_threshold``.
    The vector covering the most not-yet-covered points is kept repeatedly
    (ties to the lowest training index) until every class point is covered.
    Kept vectors retain their fitted parameters; the kept list stays in
    training order.
    """
    if not 0.0 < cover_threshold <= 1.0:
        raise ConfigError("cover_threshold must lie in (0, 1]")
    reduced: dict = {}
    for label in model.class_list:
        evs = model.vectors.get(label, [])
        if len(evs) <= 1:
            reduced[label] = list(evs)
            continue
        anchors = np.vstack([ev.anchor for ev in evs])
        dists = pairwise_distances(anchors, anchors, model.metric)
        covers = np.empty_like(dists, dtype=bool)
        for i, ev in enumerate(evs):
            covers[i] = inclusion_probability(dists[i], ev.weibull) >= cover_threshold
        uncovered = np.ones(len(evs), dtype=bool)
        keep = []
        while uncovered.any():
            gains = (covers & uncovered).sum(axis=1)
            best = int(np.argmax(gains))  # argmax breaks ties at lowest index
            keep.append(best)
            uncovered &= ~covers[best]
        reduced[label] = [evs[i] for i in sorted(keep)]
    return EvmModel(
        class_list=list(model.class_list),
        vectors=reduced,
        metric=model.metric,
        tail_size=model.tail_size,
        cover_threshold=cover_threshold,
        reject_threshold=model.reject_threshold,
    )


def _class_scores(model: EvmModel, queries: np.ndarray) -> np.ndarray:
    """Score matrix (n_queries, n_classes): max psi per class."""
    model.require_nonempty_classes()
    per_class = []
    for label in model.class_list:
        evs = model.vectors[label]
        per_class.append(
            (
                np.vstack([ev.anchor for ev in evs]),
                np.array([ev.weibull.shape for ev in evs]),
                np.array([ev.weibull.scale for ev in evs]),
            )
        )
    scores = np.empty((queries.shape[0], len(model.class_list)))
    for start in range(0, queries.shape[0], _CHUNK):
        stop = min(start + _CHUNK, queries.shape[0])
        block = queries[start:stop]
        for c, (anchors, shapes, scales) in enumerate(per_class):
            dists = pairwise_distances(block, anchors, model.metric)
            with np.errstate(over="ignore"):
                psi_block = np.exp(-((dists / scales) ** shapes))
            scores[start:stop, c] = psi_block.max(axis=1)
    return scores


def evm_predict_batch(model: EvmModel, queries) -> tuple[list, np.ndarray]:
    """Predict labels (None = rejected as unknown) and best scores."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    scores = _class_scores(model, queries)
    winners = np.argmax(scores, axis=1)  # ties resolve to the lowest class index
    probs = scores[np.arange(queries.shape[0]), winners]
    labels = [
        model.class_list[w] if p >= model.reject_threshold else None
        for w, p in zip(winners, probs)
    ]
    return labels, probs


def evm_predict(model: EvmModel, query) -> tuple[object, float]:
    """Predict a single query; returns (label or None, best score)."""
    labels, probs = evm_predict_batch(model, np.atleast_2d(query))
    return labels[0], float(probs[0])


def evm_to_payload(model: EvmModel) -> dict:
    """JSON-ready dict; refuses models violating the per-class invariant."""
    model.require_nonempty_classes()
    return {
        "metric": model.metric,
        "tail_size": model.tail_size,
        "cover_threshold": model.cover_threshold,
        "reject_threshold": model.reject_threshold,
        "class_list": list(model.class_list),
        "extreme_vectors": [
            {
                "class_label": label,
                "vectors": [
                    {
                        "anchor": ev.anchor.tolist(),
                        "shape": ev.weibull.shape,
                        "scale": ev.weibull.scale,
                    }
                    for ev in model.vectors[label]
                ],
            }
            for label in model.class_list
        ],
    }


def evm_from_payload(payload: dict) -> EvmModel:
    try:
        class_list = list(payload["class_list"])
        vectors: dict = {}
        for group in payload["extreme_vectors"]:
            label = group["class_label"]
            vectors[label] = [
                ExtremeVector(
                    anchor=np.asarray(v["anchor"], dtype=float),
                    weibull=WeibullParams(shape=v["shape"], scale=v["scale"]),
                    class_label=label,
                )
                for v in group["vectors"]
            ]
        model = EvmModel(
            class_list=class_list,
            vectors=vectors,
            metric=payload["metric"],
            tail_size=payload["tail_size"],
            cover_threshold=payload["cover_threshold"],
            reject_threshold=payload["reject_threshold"],
        )
    except (KeyError, TypeError) as exc:
        raise DataError(f"model payload missing or malformed field: {exc}") from exc
    model.require_nonempty_classes()
    return model


def save_model(model: EvmModel, path, scaler=None, filters=None, pipeline=None) -> None:
    """Write a self-contained JSON bundle for this model (see ``modelio``)."""
    from . import modelio

    modelio.save_bundle(
        path,
        classifier="evm",
        payload=evm_to_payload(model),
        scaler=scaler,
        filters=filters,
        pipeline=pipeline,
    )


def load_model(path) -> EvmModel:
    """Load an EVM model saved by ``save_model``."""
    from . import modelio

    bundle = modelio.load_bundle(path)
    if bundle["classifier"] != "evm":
        raise DataError(f"bundle holds a {bundle['classifier']!r} model, not EVM")
    return evm_from_payload(bundle["payload"])
