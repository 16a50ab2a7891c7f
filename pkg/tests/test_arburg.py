import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emgevm.arburg import (
    ArModel,
    ReflectionModel,
    ar_psd,
    autocorrelation,
    burg,
    default_freq_grid,
    extract_features,
    is_stable_ar,
    lattice_filter,
    lattice_stages,
    reflection_to_ar,
    step_up,
    yule_walker,
)
from emgevm.dataio import gen_ar_process
from emgevm.errors import ConfigError, NumericError

from oracles import naive_ar_psd, step_down


def alternating(n):
    return np.array([1.0, -1.0] * (n // 2))


# --------------------------------------------------------------------- burg

def test_burg_alternating_is_exact():
    # closed form: numerator -2 * -(N-1), denominator 2(N-1)
    model = burg(alternating(16), 1)
    assert model.k[0] == 1.0


def test_burg_order_zero():
    x = np.array([1.0, 2.0, 3.0])
    model = burg(x, 0)
    assert model.k.size == 0
    assert model.noise_var == pytest.approx(np.mean(x**2))


def test_burg_matches_yule_walker_and_truth():
    v = gen_ar_process([-0.5], 1.0, 100000, seed=21)
    k1 = burg(v, 1).k[0]
    yw = yule_walker(autocorrelation(v, 1), 1)
    assert abs(k1 - yw.a[1]) < 0.02
    assert abs(k1 - (-0.5)) < 0.03


def test_burg_rejects_short_and_silent_frames():
    with pytest.raises(ConfigError):
        burg(np.zeros(3), 3)
    with pytest.raises(NumericError):
        burg(np.zeros(10), 2)


def test_burg_degenerate_guard_pads_with_zeros():
    # A perfectly predictable frame zeroes both error sequences after the
    # first stage; later stages must stop and flag instead of dividing by 0.
    model = burg(alternating(32), 3)
    assert model.degenerate
    assert model.k[0] == 1.0
    assert np.array_equal(model.k[1:], [0.0, 0.0])


@settings(max_examples=80, deadline=None)
@given(
    data=st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=64),
    order=st.integers(1, 12),
)
def test_burg_reflection_bound(data, order):
    x = np.asarray(data)
    order = min(order, x.size - 1)
    if np.dot(x, x) == 0.0:
        with pytest.raises(NumericError):
            burg(x, order)
    else:
        assert np.all(np.abs(burg(x, order).k) <= 1.0)


def test_burg_residual_power_non_increasing():
    # Burg's windowed least-squares objective cannot grow with the order.
    rng = np.random.default_rng(4)
    for trial in range(10):
        n = int(rng.integers(64, 1024))
        x = gen_ar_process([-0.6, 0.3], 1.0, n, seed=trial)
        prev_obj = None
        prev_nv = None
        for p in range(0, 13):
            model = burg(x, p)
            f, b = lattice_stages(x, model.k)
            obj = float(np.dot(f[p:], f[p:]) + np.dot(b[p:], b[p:]))
            if prev_obj is not None:
                assert obj <= prev_obj
                assert model.noise_var <= prev_nv
            prev_obj, prev_nv = obj, model.noise_var


# ----------------------------------------------------------------- levinson

def test_step_up_hand_cases():
    assert np.array_equal(step_up([]), [1.0])
    assert np.array_equal(step_up([0.7]), [1.0, 0.7])
    # two-stage recursion by hand: a1 = 0.5 + (-0.3)(0.5) = 0.35
    assert np.allclose(step_up([0.5, -0.3]), [1.0, 0.35, -0.3])


def test_reflection_to_ar_carries_noise_var():
    model = ReflectionModel(k=np.array([0.5, -0.3]), noise_var=2.0, order=2)
    ar = reflection_to_ar(model)
    assert ar.noise_var == 2.0
    assert np.allclose(ar.a, [1.0, 0.35, -0.3])


def test_step_up_step_down_roundtrip():
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = int(rng.integers(1, 13))
        k = rng.uniform(-0.99, 0.99, p)
        assert np.allclose(step_down(step_up(k)), k, atol=1e-9)


# ------------------------------------------------------------------ lattice

def test_lattice_zero_coefficients_is_identity():
    x = np.array([3.0, -1.0, 4.0, 1.0, -5.0])
    assert np.array_equal(lattice_filter(x, [0.0, 0.0, 0.0]), x)


def test_lattice_single_stage_by_hand():
    # f1(0) = x0 (zero initial b), f1(1) = x1 + k*x0
    x = np.array([2.0, 5.0])
    k1 = 0.25
    out = lattice_filter(x, [k1])
    assert np.array_equal(out, [2.0, 5.0 + 0.25 * 2.0])


def test_lattice_equals_direct_fir():
    rng = np.random.default_rng(9)
    for _ in range(20):
        p = int(rng.integers(1, 9))
        k = rng.uniform(-0.95, 0.95, p)
        x = rng.standard_normal(int(rng.integers(p + 1, 200)))
        direct = np.convolve(x, step_up(k))[: x.size]
        assert np.allclose(lattice_filter(x, k), direct, atol=1e-10)


def test_lattice_residual_matches_generator_noise():
    v = gen_ar_process([-0.5], 1.0, 100000, seed=33)
    k = burg(v, 1).k
    res = lattice_filter(v, k)
    assert abs(float(np.mean(res**2)) - 1.0) < 0.05


def test_lattice_rejects_empty_frame():
    with pytest.raises(ConfigError):
        lattice_filter(np.array([]), [0.5])


# ---------------------------------------------------------------------- psd

def test_psd_flat_for_white_noise():
    model = ArModel(a=np.array([1.0]), noise_var=2.0)
    psd = ar_psd(model, default_freq_grid(64))
    assert np.all(psd == 2.0)


def test_psd_peak_at_pole_angle():
    # conjugate poles, radius 0.95, angle pi/4 -> peak near f = 0.125
    r, theta = 0.95, np.pi / 4
    model = ArModel(a=np.array([1.0, -2 * r * np.cos(theta), r * r]), noise_var=1.0)
    grid = default_freq_grid(512)
    psd = ar_psd(model, grid)
    step = grid[1] - grid[0]
    dense = np.linspace(0.0, 0.5, 20001)
    oracle_peak = dense[np.argmax(naive_ar_psd(model.a, 1.0, dense))]
    assert abs(grid[np.argmax(psd)] - oracle_peak) <= step
    assert abs(grid[np.argmax(psd)] - 0.125) <= step


def test_psd_matches_naive_oracle():
    rng = np.random.default_rng(12)
    k = rng.uniform(-0.9, 0.9, 5)
    model = ArModel(a=step_up(k), noise_var=1.7)
    grid = default_freq_grid(64)
    assert np.allclose(ar_psd(model, grid), naive_ar_psd(model.a, 1.7, grid), rtol=1e-10)


def test_psd_non_negative_on_random_stable_models():
    rng = np.random.default_rng(13)
    grid = default_freq_grid(128)
    for _ in range(100):
        p = int(rng.integers(1, 9))
        k = rng.uniform(-0.99, 0.99, p)
        model = ArModel(a=step_up(k), noise_var=float(rng.uniform(0.1, 5.0)))
        psd = ar_psd(model, grid)
        assert np.all(psd >= 0.0)
        assert np.all(np.isfinite(psd))


def test_psd_conjugate_symmetry():
    model = ArModel(a=np.array([1.0, -0.4, 0.2]), noise_var=1.0)
    freqs = np.linspace(0.0, 0.5, 11)
    forward = ar_psd(model, freqs)
    mirrored = naive_ar_psd(model.a, 1.0, -freqs)
    assert np.allclose(forward, mirrored)


def test_psd_pole_on_grid_warns_infinite():
    model = ArModel(a=np.array([1.0, -1.0]), noise_var=1.0)  # pole at f = 0
    with pytest.warns(UserWarning):
        psd = ar_psd(model, np.array([0.0, 0.25]))
    assert np.isinf(psd[0]) and np.isfinite(psd[1])


def test_psd_rejects_out_of_range_grid():
    model = ArModel(a=np.array([1.0]), noise_var=1.0)
    with pytest.raises(ConfigError):
        ar_psd(model, np.array([0.6]))


# ----------------------------------------------------------- autocorrelation

def test_autocorrelation_constant_signal():
    n, c = 10, 3.0
    r = autocorrelation(np.full(n, c), 4)
    expected = [c * c * (n - m) / n for m in range(5)]
    assert np.allclose(r, expected)


def test_autocorrelation_zero_signal():
    assert np.array_equal(autocorrelation(np.zeros(8), 3), np.zeros(4))


def test_autocorrelation_white_noise_uncorrelated():
    v = gen_ar_process([], 1.0, 100000, seed=44)
    r = autocorrelation(v, 1)
    assert abs(r[1] / r[0]) < 0.02


def test_autocorrelation_lag_bound():
    with pytest.raises(ConfigError):
        autocorrelation(np.ones(5), 5)


# -------------------------------------------------------------- yule-walker

def test_yule_walker_first_order():
    model = yule_walker(np.array([1.0, 0.5]), 1)
    assert np.allclose(model.a, [1.0, -0.5])
    assert model.noise_var == pytest.approx(0.75)


def test_yule_walker_white_noise():
    model = yule_walker(np.array([1.0, 0.0, 0.0]), 2)
    assert np.allclose(model.a, [1.0, 0.0, 0.0])
    assert model.noise_var == pytest.approx(1.0)


def test_yule_walker_recovers_ar1():
    v = gen_ar_process([-0.5], 1.0, 100000, seed=55)
    model = yule_walker(autocorrelation(v, 1), 1)
    assert abs(model.a[1] - (-0.5)) < 0.02


def test_yule_walker_degenerate_input():
    with pytest.raises(NumericError):
        yule_walker(np.array([0.0, 0.0]), 1)
    with pytest.raises(NumericError):
        yule_walker(np.array([1.0, 1.0, 1.0]), 2)  # singular at stage 2
    with pytest.raises(ConfigError):
        yule_walker(np.array([1.0]), 1)


def test_is_stable_ar():
    assert is_stable_ar([-0.5])
    assert not is_stable_ar([-1.5])
    assert is_stable_ar([])


# ----------------------------------------------------------------- features

def test_extract_features_dimensions():
    rng = np.random.default_rng(17)
    frames = [rng.standard_normal(100), rng.standard_normal(100)]
    feats = extract_features(frames, 10)
    assert feats.shape == (20,)
    with_nv = extract_features(frames, 10, include_noise_var=True)
    assert with_nv.shape == (22,)


def test_extract_features_identical_channels():
    x = np.random.default_rng(18).standard_normal(64)
    feats = extract_features([x, x], 5)
    assert np.array_equal(feats[:5], feats[5:])


def test_extract_features_alternating_first_coefficient():
    feats = extract_features([alternating(20), np.random.default_rng(1).standard_normal(20)], 1)
    assert feats[0] == 1.0
