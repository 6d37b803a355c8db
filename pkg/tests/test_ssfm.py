import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiberpinn.errors import CoverageError, DivergenceError, InvalidConfigError, InvalidGridError
from fiberpinn.physical_model import (
    GriddedField,
    NlseCoefficients,
    SignalSpec,
    build_grid,
    coefficients_for_rate,
    compute_normalization,
    derive_fiber_params,
)
from fiberpinn.ssfm import (
    FieldEvolution,
    SsfmConfig,
    nlse_residual_fd,
    propagate,
    reference_solution,
    to_normalized,
)


def gaussian_launch(cfg, t0, p0=1.0):
    t = cfg.time_axis()
    return math.sqrt(p0) * np.exp(-t ** 2 / (2 * t0 ** 2)).astype(complex)


def rms_width(t, a):
    p = np.abs(a) ** 2
    m = np.sum(t * p) / np.sum(p)
    return math.sqrt(np.sum((t - m) ** 2 * p) / np.sum(p))


# ---- configuration ---------------------------------------------------

@pytest.mark.parametrize("m", [4, 100, 1000])
def test_config_needs_power_of_two(m):
    with pytest.raises(InvalidConfigError):
        SsfmConfig(step_length=1.0, n_time_samples=m, window=1.0)


def test_config_rejects_bad_values():
    with pytest.raises(InvalidConfigError):
        SsfmConfig(step_length=0.0, n_time_samples=8, window=1.0)
    with pytest.raises(InvalidConfigError):
        SsfmConfig(step_length=1.0, n_time_samples=8, window=1.0, scheme="rk4")


def test_fft_roundtrip():
    x = np.random.default_rng(3).normal(size=1024) + 0j
    assert np.max(np.abs(np.fft.ifft(np.fft.fft(x)) - x)) < 1e-12 * np.max(np.abs(x))


# ---- closed-form physics --------------------------------------------

def test_attenuation_only():
    fib = derive_fiber_params(beta2=0.0, beta3=0.0, n2=0.0)
    cfg = SsfmConfig(step_length=500.0, n_time_samples=64, window=1e-9)
    a0 = gaussian_launch(cfg, 1e-10) + 0.1
    ev = propagate(a0, fib, 1e4, cfg)
    ratio = np.abs(ev.fields[-1]) / np.abs(a0)
    assert np.allclose(ratio, math.exp(-4.605e-5 * 1e4 / 2), rtol=1e-10)
    assert math.exp(-4.605e-5 * 1e4 / 2) == pytest.approx(0.7944, abs=1e-4)


@pytest.mark.parametrize("scheme", ["symmetric", "simple"])
def test_self_phase_modulation(scheme):
    fib = derive_fiber_params(alpha=0.0, beta2=0.0, beta3=0.0)
    cfg = SsfmConfig(step_length=1e3, n_time_samples=32, window=1e-9, scheme=scheme)
    p0 = 1e-2
    a0 = np.full(32, math.sqrt(p0), dtype=complex)
    z = 5e4
    a = propagate(a0, fib, z, cfg).fields[-1]
    assert np.allclose(np.abs(a), math.sqrt(p0), rtol=1e-12)
    assert np.allclose(np.angle(a), fib.gamma * p0 * z, rtol=1e-6)


def test_dispersive_broadening():
    fib = derive_fiber_params(alpha=0.0, beta3=0.0, n2=0.0)
    t0 = 20e-12
    l_d = t0 ** 2 / abs(fib.beta2)
    cfg = SsfmConfig(step_length=l_d / 50, n_time_samples=4096, window=1.6e-9)
    a0 = gaussian_launch(cfg, t0)
    a = propagate(a0, fib, l_d, cfg).fields[-1]
    t = cfg.time_axis()
    assert rms_width(t, a) / rms_width(t, a0) == pytest.approx(math.sqrt(2), rel=1e-3)


def test_energy_conserved_without_loss():
    fib = derive_fiber_params(alpha=0.0)
    cfg = SsfmConfig(step_length=1e3, n_time_samples=1024, window=1.6e-9)
    a0 = gaussian_launch(cfg, 50e-12, p0=1e-2)
    a = propagate(a0, fib, 1e5, cfg).fields[-1]
    e0, e1 = np.sum(np.abs(a0) ** 2), np.sum(np.abs(a) ** 2)
    assert abs(e1 - e0) / e0 < 1e-8


def test_linear_regime_additive():
    fib = derive_fiber_params(n2=0.0)
    cfg = SsfmConfig(step_length=2e3, n_time_samples=256, window=1e-9)
    rng = np.random.default_rng(1)
    x = rng.normal(size=256) + 1j * rng.normal(size=256)
    y = rng.normal(size=256) + 1j * rng.normal(size=256)
    px = propagate(x, fib, 2e4, cfg).fields[-1]
    py = propagate(y, fib, 2e4, cfg).fields[-1]
    pxy = propagate(x + y, fib, 2e4, cfg).fields[-1]
    assert np.max(np.abs(pxy - px - py)) < 1e-12 * np.max(np.abs(pxy))


def test_second_order_convergence():
    fib = derive_fiber_params()
    window = 16 / 10e9
    h = 1e4
    cfgs = [SsfmConfig(step_length=h / k, n_time_samples=512, window=window) for k in (1, 2, 4)]
    a0 = gaussian_launch(cfgs[0], 30e-12, p0=5e-2)
    out = [propagate(a0, fib, 1e5, c).fields[-1] for c in cfgs]
    e1 = np.linalg.norm(out[0] - out[2])
    e2 = np.linalg.norm(out[1] - out[2])
    # with the finest run as reference, a second-order scheme gives (1 - 1/16)/(1/4 - 1/16) = 5
    assert 4.0 < e1 / e2 < 6.0


def test_snapshots_land_exactly():
    fib = derive_fiber_params()
    cfg = SsfmConfig(step_length=3e3, n_time_samples=64, window=1e-9)
    a0 = gaussian_launch(cfg, 1e-10)
    ev = propagate(a0, fib, 1e4, cfg, snapshot_distances=[2.5e3, 7e3])
    assert list(ev.z) == [0.0, 2.5e3, 7e3, 1e4]
    assert np.array_equal(ev.fields[0], a0)
    assert np.all(np.diff(ev.z) > 0)


def test_zero_distance():
    fib = derive_fiber_params()
    cfg = SsfmConfig(step_length=1e3, n_time_samples=16, window=1e-9)
    a0 = np.ones(16, dtype=complex)
    ev = propagate(a0, fib, 0.0, cfg)
    assert list(ev.z) == [0.0] and np.array_equal(ev.fields[-1], a0)


def test_propagate_input_checks():
    fib = derive_fiber_params()
    cfg = SsfmConfig(step_length=1e3, n_time_samples=16, window=1e-9)
    with pytest.raises(InvalidConfigError):
        propagate(np.ones(8), fib, 1e3, cfg)
    with pytest.raises(CoverageError):
        propagate(np.ones(16), fib, 1e3, cfg, snapshot_distances=[2e3])


def test_divergence_names_step():
    fib = derive_fiber_params(alpha=0.0, beta2=0.0, beta3=0.0, n2=1e-10)
    cfg = SsfmConfig(step_length=1e3, n_time_samples=16, window=1e-9)
    a0 = np.full(16, 1e160, dtype=complex)
    with pytest.raises(DivergenceError) as info:
        propagate(a0, fib, 1e4, cfg)
    assert info.value.step == 1


def test_evolution_csv(tmp_path):
    ev = FieldEvolution(np.array([0.0, 5.0]), np.array([[1 + 2j, 3j], [0.5, -1j]]),
                        np.array([0.0, 1.0]), 2.0)
    ev.to_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "z_m,sample_index,re,im"
    assert len(lines) == 5
    assert lines[1] == "0.0,0,1.0,2.0"


# ---- normalization of an evolution ----------------------------------

def _nmap(p0=1e-2, rate=10e9):
    spec = SignalSpec(rate, peak_power=p0, pattern=(0, 1, 1, 0))
    return compute_normalization(derive_fiber_params(), spec, l_max=1e4)


def test_zero_field_normalizes_to_zero():
    nmap = _nmap()
    grid = build_grid(9, 3, 3)
    cfg = SsfmConfig(step_length=1e3, n_time_samples=64, window=2 * nmap.t_max)
    ev = propagate(np.zeros(64, complex), derive_fiber_params(), 1e4, cfg,
                   snapshot_distances=1e4 * grid.zeta_nodes)
    assert np.all(to_normalized(ev, nmap, grid).values == 0)


def test_peak_power_normalizes_to_one():
    nmap = _nmap(p0=3e-3)
    grid = build_grid(65, 3, 3)
    cfg = SsfmConfig(step_length=1e3, n_time_samples=64, window=2 * nmap.t_max)
    a0 = math.sqrt(3e-3) * np.exp(-(cfg.time_axis() / 5e-11) ** 2)
    ev = propagate(a0.astype(complex), derive_fiber_params(), 1e4, cfg,
                   snapshot_distances=1e4 * grid.zeta_nodes)
    fld = to_normalized(ev, nmap, grid)
    assert np.max(np.abs(fld.values[0])) == pytest.approx(1.0, rel=1e-12)


def test_attenuation_survives_normalization():
    fib = derive_fiber_params(beta2=1e-40, beta3=0.0, n2=0.0)
    spec = SignalSpec(10e9, pattern=(1, 1, 1, 1))
    grid = build_grid(33, 5, 4)
    fld, nmap = reference_solution(fib, spec, grid, 1e5, n_time_samples=64)
    assert np.max(np.abs(fld.values[-1])) == pytest.approx(math.exp(-4.605e-5 * 1e5 / 2),
                                                          rel=1e-10)


def test_coverage_errors():
    nmap = _nmap()
    grid = build_grid(9, 3, 3)
    cfg = SsfmConfig(step_length=1e3, n_time_samples=64, window=2 * nmap.t_max)
    ev = propagate(np.zeros(64, complex), derive_fiber_params(), 1e4, cfg)
    with pytest.raises(CoverageError):
        to_normalized(ev, nmap, grid)  # no snapshot at zeta = 0.5
    short = SsfmConfig(step_length=1e3, n_time_samples=64, window=nmap.t_max)
    ev = propagate(np.zeros(64, complex), derive_fiber_params(), 1e4, short,
                   snapshot_distances=1e4 * grid.zeta_nodes)
    with pytest.raises(CoverageError):
        to_normalized(ev, nmap, grid)


# ---- finite-difference residual -------------------------------------

def test_fd_residual_zero_field():
    grid = build_grid(16, 5, 4)
    co = coefficients_for_rate(derive_fiber_params(), SignalSpec(10e9), 10e9)
    fld = GriddedField.from_complex(grid, np.zeros(grid.shape))
    assert nlse_residual_fd(fld, co) == 0.0


def test_fd_residual_constant_field():
    grid = build_grid(16, 5, 4)
    co = coefficients_for_rate(derive_fiber_params(), SignalSpec(10e9), 10e9)
    fld = GriddedField.from_complex(grid, np.ones(grid.shape))
    k1 = co.kappa1
    assert nlse_residual_fd(fld, co) == pytest.approx(k1 ** 2 * (co.a2 ** 2 + co.a5 ** 2),
                                                      rel=1e-12)


def test_fd_residual_grid_too_small():
    co = NlseCoefficients(1, 0, 0.5, 0, 0, 1, 1)
    fld = GriddedField.from_complex(build_grid(7, 5, 2), np.zeros((5, 7)))
    with pytest.raises(InvalidGridError):
        nlse_residual_fd(fld, co)


@given(st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=25, deadline=None)
def test_fd_residual_exact_on_cubic_polynomials(a, b):
    # central stencils are exact for s = a t^3 + b zeta^2 (up to rounding)
    grid = build_grid(21, 7, 3)
    co = NlseCoefficients(1, 0, 0.5, 0.01, 0, 1, 1)
    tt, zz = grid.points()
    s = (a * tt ** 3 + b * zz ** 2).reshape(grid.shape)
    fld = GriddedField.from_complex(grid, s)
    t = grid.t_nodes[2:-2]
    z = grid.zeta_nodes[1:-1][:, None]
    r = 1j * 2 * b * z + 0.5 * 6 * a * t + 1j * 0.01 * 6 * a
    expect = np.mean(np.abs(r) ** 2 * np.ones((z.size, t.size)))
    assert nlse_residual_fd(fld, co) == pytest.approx(expect, rel=1e-8, abs=1e-18)


@pytest.mark.parametrize("rate", [2e9, 10e9, 50e9])
def test_oracle_residual_small_and_converging(rate):
    fib = derive_fiber_params()
    spec = SignalSpec(rate)
    co = coefficients_for_rate(fib, spec, rate)
    rel = []
    for n_t, n_z, m in [(257, 501, 1024), (513, 1001, 2048)]:
        grid = build_grid(n_t, n_z, 2)
        fld, _ = reference_solution(fib, spec, grid, 1e5, n_time_samples=m,
                                    step_length=1e5 / (n_z - 1))
        rel.append(nlse_residual_fd(fld, co) / np.mean(np.abs(fld.values) ** 2))
    assert rel[1] < 1e-2 and rel[1] < rel[0]
