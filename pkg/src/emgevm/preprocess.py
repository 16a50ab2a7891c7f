"""Noise filtering and feature standardization.

Filters are realized as cascaded second-order sections from the standard
analytic notch and Butterworth band-pass prototypes and applied forward
only (causal).  The default chain for surface EMG is a 50 Hz notch (Q=30)
followed by a 20-450 Hz band-pass of design order 4; the exact default
coefficients are pinned in ``docs/default_filter_coefficients.json``.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy.signal import butter, iirnotch, sosfilt

from .errors import ConfigError

NOTCH = "notch"
BANDPASS = "bandpass"


@dataclass
class FilterSpec:
    """Parameters of one filter stage.

    ``kind`` selects which fields are active: a notch uses ``notch_freq``
    and ``notch_q``; a band-pass uses ``band_low``, ``band_high``, and
    ``filter_order`` (the Butterworth design order; a band-pass of design
    order N has 2N poles).
    """

    kind: str
    sample_rate: float
    notch_freq: float = 50.0
    notch_q: float = 30.0
    band_low: float = 20.0
    band_high: float = 450.0
    filter_order: int = 4

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        nyquist = self.sample_rate / 2.0
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")
        if self.kind == NOTCH:
            if not 0 < self.notch_freq < nyquist:
                raise ConfigError(
                    f"notch_freq must lie in (0, {nyquist}), got {self.notch_freq}"
                )
            if self.notch_q <= 0:
                raise ConfigError("notch_q must be positive")
        elif self.kind == BANDPASS:
            if not 0 < self.band_low < self.band_high < nyquist:
                raise ConfigError(
                    "band edges must satisfy 0 < low < high < sample_rate/2, "
                    f"got ({self.band_low}, {self.band_high}) at fs={self.sample_rate}"
                )
            if self.filter_order < 1:
                raise ConfigError("filter_order must be >= 1")
        else:
            raise ConfigError(f"unknown filter kind {self.kind!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FilterSpec":
        return cls(**d)


def design_sos(spec: FilterSpec) -> np.ndarray:
    """Second-order sections (shape (n, 6)) realizing the spec."""
    spec.validate()
    if spec.kind == NOTCH:
        b, a = iirnotch(spec.notch_freq, spec.notch_q, fs=spec.sample_rate)
        return np.hstack([b, a])[None, :]
    return butter(
        spec.filter_order,
        [spec.band_low, spec.band_high],
        btype="bandpass",
        fs=spec.sample_rate,
        output="sos",
    )


def default_filters(sample_rate: float) -> list[FilterSpec]:
    """Conventional surface-EMG chain: 50 Hz notch then 20-450 Hz band-pass."""
    return [
        FilterSpec(kind=NOTCH, sample_rate=sample_rate),
        FilterSpec(kind=BANDPASS, sample_rate=sample_rate),
    ]


def apply_filter(signal, spec: FilterSpec) -> np.ndarray:
    """Run the filter causally over the signal (same length out as in).

    The first ~3 * sample_rate / band_low samples (band-pass) or
    ~Q * sample_rate / notch_freq samples (notch) are warm-up; callers
    measuring steady-state behavior should discard them.
    """
    x = np.asarray(signal, dtype=float)
    return sosfilt(design_sos(spec), x)


def apply_filter_chain(signal, specs: list[FilterSpec]) -> np.ndarray:
    x = np.asarray(signal, dtype=float)
    for spec in specs:
        x = apply_filter(x, spec)
    return x


@dataclass
class ScalerParams:
    """Per-feature mean and population standard deviation."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=float)
        self.stds = np.asarray(self.stds, dtype=float)
        if self.means.shape != self.stds.shape or self.means.ndim != 1:
            raise ConfigError("means and stds must be 1-D arrays of equal length")
        if np.any(self.stds < 0):
            raise ConfigError("stds must be non-negative")

    def constant_features(self) -> np.ndarray:
        """Indices of features flagged constant (zero std)."""
        return np.flatnonzero(self.stds == 0)

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(means=d["means"], stds=d["stds"])


def fit_scaler(features) -> ScalerParams:
    """Fit per-dimension mean and population std (ddof=0)."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 2:
        raise ConfigError("features must be a 2-D array")
    if x.shape[0] < 2:
        raise ConfigError(f"need at least 2 examples to fit a scaler, got {x.shape[0]}")
    return ScalerParams(means=x.mean(axis=0), stds=x.std(axis=0, ddof=0))


def apply_scaler(features, params: ScalerParams) -> np.ndarray:
    """Standardize features; constant dimensions map to 0."""
    x = np.asarray(features, dtype=float)
    if x.shape[-1] != params.means.size:
        raise ConfigError(
            f"feature dimension {x.shape[-1]} does not match scaler "
            f"dimension {params.means.size}"
        )
    safe = np.where(params.stds == 0, 1.0, params.stds)
    out = (x - params.means) / safe
    if x.ndim == 1:
        out[params.stds == 0] = 0.0
    else:
        out[:, params.stds == 0] = 0.0
    return out
