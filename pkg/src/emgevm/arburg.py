"""Burg reflection-coefficient estimation and related AR machinery.

Sign conventions
----------------
The AR model is written ``v(t) = -sum_{i=1..p} a_i v(t-i) + eps(t)``, so the
prediction-error (FIR) form is ``eps(t) = sum_{i=0..p} a_i v(t-i)`` with
``a_0 = 1``.  An AR(1) process with pole 0.5 therefore has ``a_1 = -0.5``,
and Burg's first reflection coefficient for that process is also ~-0.5.
Texts differ on these signs; everything in this package uses the convention
above consistently (Burg, Levinson step-up, Yule-Walker, lattice, PSD).

The lattice recursion cascaded by ``burg`` and ``lattice_filter`` is

    f_i(t) = f_{i-1}(t) + k_i * b_{i-1}(t-1)
    b_i(t) = b_{i-1}(t-1) + k_i * f_{i-1}(t)

with ``f_0 = b_0 = v`` and the final forward error equal to the residual.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError

# Stage denominators below this are treated as silence: the recursion stops,
# remaining coefficients are zero, and the model is flagged degenerate.
_DENOMINATOR_FLOOR = 1e-30


@dataclass
class ReflectionModel:
    """Reflection coefficients ``k_1..k_p`` plus the residual noise power.

    ``degenerate`` marks frames whose Burg recursion was cut short by a
    vanishing denominator (near-silent windows); the remaining coefficients
    are zero-padded.
    """

    k: np.ndarray
    noise_var: float
    order: int
    degenerate: bool = False

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=float)
        if self.k.size != self.order:
            raise ConfigError("reflection coefficient count must equal order")
        if np.any(np.abs(self.k) > 1.0):
            raise ConfigError("reflection coefficients must satisfy |k| <= 1")
        if self.noise_var < 0:
            raise ConfigError("noise_var must be non-negative")


@dataclass
class ArModel:
    """Direct-form AR coefficients ``a_0..a_p`` with ``a_0 = 1``."""

    a: np.ndarray
    noise_var: float

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        if self.a.size < 1 or self.a[0] != 1.0:
            raise ConfigError("AR coefficient array must start with a_0 = 1")
        if self.noise_var < 0:
            raise ConfigError("noise_var must be non-negative")

    @property
    def order(self) -> int:
        return self.a.size - 1


def burg(frame, order: int) -> ReflectionModel:
    """Estimate reflection coefficients by Burg's method.

    At stage m the coefficient minimizing the summed squared forward and
    backward prediction errors is

        k_m = -2 * sum_t f(t) b(t-1) / sum_t (f(t)^2 + b(t-1)^2)

    with the sums over the stage's valid overlap, after which both error
    sequences are updated through the lattice recursion.  The estimates
    satisfy |k_m| <= 1 by construction (Cauchy-Schwarz); they are clipped
    to [-1, 1] to keep the bound exact under floating-point rounding.

    ``noise_var`` is the residual mean power tracked through
    ``E_m = E_{m-1} * (1 - k_m^2)`` from ``E_0 = mean(frame^2)``.
    """
    x = np.asarray(frame, dtype=float)
    if order < 0:
        raise ConfigError("order must be >= 0")
    if x.ndim != 1 or x.size <= order:
        raise ConfigError(
            f"frame length must exceed the order (length {x.size}, order {order})"
        )
    energy = float(np.dot(x, x) / x.size)
    if energy == 0.0:
        raise NumericError("all-zero frame: Burg denominator is zero")
    if order == 0:
        return ReflectionModel(k=np.zeros(0), noise_var=energy, order=0)
    return _burg_recursion(x, order, energy)


def _burg_recursion(x: np.ndarray, order: int, energy: float) -> ReflectionModel:
    k = np.zeros(order)
    f = x.copy()
    b = x.copy()
    e = energy
    degenerate = False
    for m in range(1, order + 1):
        fs = f[m:]
        bs = b[m - 1 : -1]
        den = float(np.dot(fs, fs) + np.dot(bs, bs))
        if den < _DENOMINATOR_FLOOR:
            degenerate = True
            break
        km = float(np.clip(-2.0 * np.dot(fs, bs) / den, -1.0, 1.0))
        k[m - 1] = km
        f_new = fs + km * bs
        b_new = bs + km * fs
        f[m:] = f_new
        b[m:] = b_new
        e *= 1.0 - km * km
    return ReflectionModel(k=k, noise_var=e, order=order, degenerate=degenerate)


def step_up(k) -> np.ndarray:
    """Levinson step-up: reflection coefficients to direct-form ``a_0..a_p``."""
    k = np.asarray(k, dtype=float)
    a = np.ones(1)
    for m, km in enumerate(k, start=1):
        prev = a
        a = np.empty(m + 1)
        a[0] = 1.0
        a[1:m] = prev[1:m] + km * prev[m - 1 : 0 : -1]
        a[m] = km
    return a


def reflection_to_ar(model: ReflectionModel) -> ArModel:
    """Convert a reflection model to direct form, carrying the noise power."""
    if np.any(np.abs(model.k) > 1.0):
        raise ConfigError("reflection coefficients must satisfy |k| <= 1")
    return ArModel(a=step_up(model.k), noise_var=model.noise_var)


def lattice_stages(frame, k) -> tuple[np.ndarray, np.ndarray]:
    """Final-stage forward and backward error sequences of the lattice.

    Initial conditions are zero (b_i(-1) = 0), equivalent to filtering with
    the direct-form coefficients over a zero-padded past.
    """
    f = np.asarray(frame, dtype=float).copy()
    if f.size == 0:
        raise ConfigError("frame must be non-empty")
    b = f.copy()
    for km in np.asarray(k, dtype=float):
        b_prev = np.concatenate(([0.0], b[:-1]))
        f, b = f + km * b_prev, b_prev + km * f
    return f, b


def lattice_filter(frame, k) -> np.ndarray:
    """Residual (final forward prediction error) of the lattice cascade."""
    f, _ = lattice_stages(frame, k)
    return f


def ar_psd(model: ArModel, freq_grid) -> np.ndarray:
    """Parametric power spectral density on normalized frequencies.

    Evaluates ``P(f) = noise_var / |1 + sum_i a_i exp(-2j*pi*i*f)|^2`` per
    grid point, f in cycles/sample restricted to [0, 0.5].  A pole landing
    exactly on a grid point produces +inf with a warning.
    """
    freqs = np.asarray(freq_grid, dtype=float)
    if freqs.size and (freqs.min() < 0.0 or freqs.max() > 0.5):
        raise ConfigError("frequency grid must lie in [0, 0.5]")
    p = model.order
    if p == 0:
        return np.full(freqs.shape, model.noise_var)
    phases = np.exp(-2j * np.pi * np.outer(freqs, np.arange(1, p + 1)))
    response = 1.0 + phases @ model.a[1:]
    den = np.abs(response) ** 2
    zero = den == 0.0
    if np.any(zero):
        warnings.warn("AR pole lies on the evaluation grid; reporting +inf")
    with np.errstate(divide="ignore"):
        power = np.where(zero, np.inf, model.noise_var / np.where(zero, 1.0, den))
    return power


def default_freq_grid(n: int = 512) -> np.ndarray:
    """Uniform normalized-frequency grid on [0, 0.5]."""
    return np.linspace(0.0, 0.5, n)


def autocorrelation(signal, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelation ``R(m) = (1/N) sum_t v(t) v(t+m)``."""
    x = np.asarray(signal, dtype=float)
    if max_lag >= x.size:
        raise ConfigError(f"max_lag {max_lag} must be below signal length {x.size}")
    if max_lag < 0:
        raise ConfigError("max_lag must be >= 0")
    n = x.size
    return np.array([np.dot(x[: n - m], x[m:]) / n for m in range(max_lag + 1)])


def yule_walker(r, order: int) -> ArModel:
    """Solve the Toeplitz normal equations by Levinson-Durbin.

    Takes an autocorrelation sequence ``R(0..m)`` and returns direct-form
    coefficients in this package's sign convention, with ``noise_var`` equal
    to the final prediction-error power.
    """
    r = np.asarray(r, dtype=float)
    if order >= r.size:
        raise ConfigError(f"order {order} requires autocorrelation lags up to {order}")
    if order < 0:
        raise ConfigError("order must be >= 0")
    if r[0] <= 0:
        raise NumericError("R(0) must be positive; degenerate autocorrelation")
    a = np.ones(1)
    e = float(r[0])
    for m in range(1, order + 1):
        if e <= 0:
            raise NumericError(f"singular Toeplitz system at stage {m}")
        acc = r[m] + float(np.dot(a[1:m], r[m - 1 : 0 : -1]))
        km = -acc / e
        prev = a
        a = np.empty(m + 1)
        a[0] = 1.0
        a[1:m] = prev[1:m] + km * prev[m - 1 : 0 : -1]
        a[m] = km
        e *= 1.0 - km * km
    if e < 0:
        raise NumericError("singular Toeplitz system: negative residual power")
    return ArModel(a=a, noise_var=e)


def is_stable_ar(ar_coeffs) -> bool:
    """True if all roots of ``1 + sum a_i z^-i`` lie inside the unit circle."""
    a = np.asarray(ar_coeffs, dtype=float)
    if a.size == 0:
        return True
    roots = np.roots(np.concatenate(([1.0], a)))
    return bool(np.all(np.abs(roots) < 1.0))


def extract_features(frames, order: int, include_noise_var: bool = False) -> np.ndarray:
    """Concatenate per-channel Burg reflection coefficients in channel order.

    ``frames`` is one window per channel (arrays or ``dataio.Frame``); the
    result has ``channels * order`` entries, or ``channels * (order + 1)``
    when each channel's residual noise power is appended to its block.
    """
    parts = []
    for frame in frames:
        samples = getattr(frame, "samples", frame)
        model = burg(samples, order)
        if include_noise_var:
            parts.append(np.concatenate((model.k, [model.noise_var])))
        else:
            parts.append(model.k)
    if not parts:
        raise ConfigError("need at least one channel frame")
    return np.concatenate(parts)
