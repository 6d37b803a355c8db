import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiberpinn.errors import (
    DegenerateDispersionError,
    InvalidGridError,
    InvalidParameterError,
)
from fiberpinn.physical_model import (
    GriddedField,
    SignalSpec,
    build_grid,
    coefficients_for_rate,
    compute_coefficients,
    compute_normalization,
    default_pattern,
    derive_fiber_params,
    nlse_residual,
    ook_initial_condition,
    ook_waveform,
)

C = 299792458.0


def gamma_by_hand(n2, a_eff, lam):
    omega = 2 * math.pi * C / lam
    return n2 * omega / (C * a_eff)


# ---- fiber parameters -------------------------------------------------

def test_gamma_table_value():
    fib = derive_fiber_params()
    assert fib.gamma == pytest.approx(gamma_by_hand(2.6e-20, 8e-11, 1.55e-6), rel=1e-12)
    assert fib.gamma == pytest.approx(1.32e-3, rel=5e-3)


def test_gamma_zero_without_n2():
    assert derive_fiber_params(n2=0.0).gamma == 0.0


def test_inputs_stored_unchanged():
    fib = derive_fiber_params(alpha=4.605e-5)
    assert fib.alpha == 4.605e-5
    assert fib.beta2 == -2e-26 and fib.beta3 == -2e-38


@pytest.mark.parametrize("kw", [dict(a_eff=0.0), dict(a_eff=-1.0), dict(lambda_c=0.0),
                                dict(alpha=-1e-5), dict(n2=-1.0)])
def test_invalid_fiber(kw):
    with pytest.raises(InvalidParameterError):
        derive_fiber_params(**kw)


@given(n2=st.floats(0, 1e-18), a_eff=st.floats(1e-12, 1e-9), lam=st.floats(1e-7, 1e-5))
def test_gamma_formula_property(n2, a_eff, lam):
    fib = derive_fiber_params(n2=n2, a_eff=a_eff, lambda_c=lam)
    assert fib.gamma == pytest.approx(gamma_by_hand(n2, a_eff, lam), rel=1e-12, abs=0)


# ---- signal ----------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(bit_rate=0.0), dict(bit_rate=1e9, peak_power=0.0),
                                dict(bit_rate=1e9, pattern=()),
                                dict(bit_rate=1e9, edge_fraction=0.6),
                                dict(bit_rate=1e9, pattern=(0, 2))])
def test_invalid_signal(kw):
    with pytest.raises(InvalidParameterError):
        SignalSpec(**kw)


def test_default_pattern_reproducible():
    assert default_pattern() == default_pattern()
    assert len(default_pattern()) == 16
    assert default_pattern(seed=1) != default_pattern(seed=2)


# ---- normalization ---------------------------------------------------

def test_dispersion_length_10g():
    fib = derive_fiber_params()
    nmap = compute_normalization(fib, SignalSpec(10e9), t_max=1.6e-9)
    assert nmap.l_d == pytest.approx(1 / (1e20 * 2e-26), rel=1e-12)
    assert nmap.l_d == pytest.approx(5e5, rel=1e-12)
    assert nmap.kappa2 == pytest.approx(16.0, rel=1e-12)


def test_kappa1_unity_when_lmax_is_ld():
    fib = derive_fiber_params()
    nmap = compute_normalization(fib, SignalSpec(10e9), l_max=5e5)
    assert nmap.kappa1 == pytest.approx(1.0, rel=1e-12)


def test_nonlinear_length():
    fib = derive_fiber_params()
    nmap = compute_normalization(fib, SignalSpec(10e9, peak_power=1e-2))
    assert nmap.l_nl == pytest.approx(1 / (gamma_by_hand(2.6e-20, 8e-11, 1.55e-6) * 1e-2))
    assert math.isinf(compute_normalization(derive_fiber_params(n2=0), SignalSpec(1e9)).l_nl)


def test_default_t_max_fills_window():
    spec = SignalSpec(10e9, pattern=(1, 0, 1, 1))
    nmap = compute_normalization(derive_fiber_params(), spec)
    assert nmap.t_max == pytest.approx(4 / (2 * 10e9))
    assert nmap.kappa2 == pytest.approx(2.0)


def test_zero_beta2_rejected():
    with pytest.raises(DegenerateDispersionError):
        compute_normalization(derive_fiber_params(beta2=0.0), SignalSpec(1e9))


def test_bad_lengths_rejected():
    fib = derive_fiber_params()
    with pytest.raises(InvalidParameterError):
        compute_normalization(fib, SignalSpec(1e9), l_max=0.0)
    with pytest.raises(InvalidParameterError):
        compute_normalization(fib, SignalSpec(1e9), t_max=-1.0)


# ---- coefficients ----------------------------------------------------

def test_a2_at_10g():
    fib = derive_fiber_params()
    co = coefficients_for_rate(fib, SignalSpec(10e9), 10e9)
    assert co.a2 == pytest.approx(4.605e-5 / (2 * 2e-26 * 1e20), rel=1e-12)
    assert co.a2 == pytest.approx(11.51, abs=0.01)


def test_a3_sign():
    fib = derive_fiber_params()
    assert coefficients_for_rate(fib, SignalSpec(1e9), 1e9).a3 == 0.5
    pos = derive_fiber_params(beta2=2e-26)
    assert coefficients_for_rate(pos, SignalSpec(1e9), 1e9).a3 == -0.5


def test_lossless_a2_zero():
    co = coefficients_for_rate(derive_fiber_params(alpha=0.0), SignalSpec(1e9), 1e9)
    assert co.a2 == 0.0 and co.a1 == 1.0


def test_a4_a5_by_hand():
    fib = derive_fiber_params()
    r = 20e9
    co = coefficients_for_rate(fib, SignalSpec(r), r)
    l_d = 1 / (r ** 2 * 2e-26)
    assert co.a4 == pytest.approx(2e-38 * l_d * r ** 3 / 6, rel=1e-12)
    assert co.a5 == pytest.approx(fib.gamma * 1e-2 * l_d, rel=1e-12)


def test_rate_scaling_laws():
    fib = derive_fiber_params()
    spec = SignalSpec(5e9)
    a = coefficients_for_rate(fib, spec, 5e9)
    b = coefficients_for_rate(fib, spec, 10e9)
    assert b.a2 == pytest.approx(a.a2 / 4, rel=1e-12)
    assert b.a5 == pytest.approx(a.a5 / 4, rel=1e-12)
    assert b.a4 == pytest.approx(a.a4 * 2, rel=1e-12)


def test_effective_coefficients_independent_of_rate_with_filled_window():
    fib = derive_fiber_params()
    spec = SignalSpec(5e9)
    a = coefficients_for_rate(fib, spec, 5e9)
    b = coefficients_for_rate(fib, spec, 40e9)
    assert a.kappa2 == b.kappa2 == 8.0
    assert a.attenuation == pytest.approx(b.attenuation, rel=1e-12)
    assert a.nonlinear == pytest.approx(b.nonlinear, rel=1e-12)
    assert b.dispersion == pytest.approx(64 * a.dispersion, rel=1e-12)


def test_compute_coefficients_copies_kappas():
    fib = derive_fiber_params()
    nmap = compute_normalization(fib, SignalSpec(10e9))
    co = compute_coefficients(nmap, fib)
    assert (co.kappa1, co.kappa2, co.bit_rate) == (nmap.kappa1, nmap.kappa2, 10e9)


def test_residual_of_constant_field():
    fib = derive_fiber_params()
    co = coefficients_for_rate(fib, SignalSpec(10e9), 10e9)
    one = np.ones(4, dtype=complex)
    zero = np.zeros(4, dtype=complex)
    r = nlse_residual(co, one, zero, zero, zero)
    expect = 1j * co.kappa1 * co.a2 + co.kappa1 * co.a5
    assert np.allclose(r, expect, rtol=1e-14)


# ---- grid ------------------------------------------------------------

def test_table_grid_size():
    g = build_grid(312, 11, 100)
    assert g.n_g == 3432 and g.n_initial == 100
    assert g.t_nodes[0] == -1 and g.t_nodes[-1] == 1
    assert g.zeta_nodes[0] == 0 and g.zeta_nodes[-1] == 1


def test_grid_endpoints_only():
    g = build_grid(2, 2, 1)
    assert list(g.t_nodes) == [-1, 1] and list(g.zeta_nodes) == [0, 1]


def test_grid_spacing():
    g = build_grid(5, 3, 5)
    assert np.allclose(np.diff(g.t_nodes), 0.5) and np.allclose(np.diff(g.zeta_nodes), 0.5)


@pytest.mark.parametrize("args", [(1, 3, 1), (3, 1, 1), (3, 3, 0), (3, 3, 4)])
def test_grid_counts_rejected(args):
    with pytest.raises(InvalidGridError):
        build_grid(*args)


def test_points_layout_and_boundary_rows():
    g = build_grid(7, 4, 3)
    tt, zz = g.points()
    assert tt.size == g.n_g
    assert np.array_equal(tt.reshape(g.shape)[2], g.t_nodes)
    idx = g.initial_flat_index()
    assert np.all(zz[idx] == 0) and np.array_equal(tt[idx], g.initial_t)


@given(n_t=st.integers(2, 400), n_zeta=st.integers(2, 30), frac=st.floats(0.01, 1))
@settings(max_examples=50)
def test_grid_invariants(n_t, n_zeta, frac):
    n_ini = max(1, int(frac * n_t))
    g = build_grid(n_t, n_zeta, n_ini)
    assert np.all(np.diff(g.t_nodes) > 0) and np.all(np.diff(g.zeta_nodes) > 0)
    assert g.n_initial == n_ini
    assert g.initial_index.min() >= 0 and g.initial_index.max() < n_t


# ---- OOK waveform ----------------------------------------------------

@pytest.mark.parametrize("shape", ["erf", "raised_cosine"])
def test_slot_centres(shape):
    t = np.array([-2 / 3, 0.0, 2 / 3])
    f = ook_waveform([1, 0, 1], 0.1, t, shape)
    assert np.allclose(f, [1, 0, 1], atol=1e-12)


@pytest.mark.parametrize("shape", ["erf", "raised_cosine"])
def test_all_zero_pattern(shape):
    g = build_grid(50, 2, 5)
    assert np.all(ook_initial_condition([0, 0, 0, 0], 0.3, g, shape) == 0)


@pytest.mark.parametrize("shape", ["erf", "raised_cosine"])
def test_transition_midpoint(shape):
    # mark -> space transition at t = 0 for pattern (1, 0): both edges symmetric
    f = ook_waveform([0, 1, 1, 0], 0.4, np.array([0.0, 1.0 - 1e-16]), shape)
    # t=0 is inside the 11 block; the 1 -> 0 edge is at t=0.5
    mid = ook_waveform([0, 1, 1, 0], 0.4, np.array([0.5]), shape)
    assert mid[0] == pytest.approx(0.5, abs=1e-12)
    assert f[0] == pytest.approx(1.0, abs=1e-6)


def test_raised_cosine_formula():
    # hand evaluation of the half-cosine ramp a quarter into a rising edge
    slot, edge = 0.5, 0.2 * 0.5
    x = -edge / 4
    expect = 0.5 * (1 - math.cos(math.pi * (x + edge / 2) / edge))
    got = ook_waveform([0, 1, 0, 0], 0.2, np.array([-0.5 + x]), "raised_cosine")[0]
    assert got == pytest.approx(expect, abs=1e-14)


def test_erf_rise_time():
    # 10-90% rise equals the edge width
    edge = 0.3 * 0.5
    t = np.linspace(-0.5 - edge, -0.5 + edge, 20001)
    f = ook_waveform([0, 1, 0, 0], 0.3, t, "erf")
    t10 = t[np.searchsorted(f, 0.1)]
    t90 = t[np.searchsorted(f, 0.9)]
    assert t90 - t10 == pytest.approx(edge, rel=1e-3)


def test_rate_independent_boundary():
    g = build_grid()
    a = SignalSpec(2e9)
    b = SignalSpec(50e9)
    fa = ook_initial_condition(a.pattern, a.edge_fraction, g, a.edge_shape)
    fb = ook_initial_condition(b.pattern, b.edge_fraction, g, b.edge_shape)
    assert np.array_equal(fa, fb)


@given(bits=st.lists(st.integers(0, 1), min_size=1, max_size=24),
       edge=st.floats(0, 0.5), shape=st.sampled_from(["erf", "raised_cosine"]))
@settings(max_examples=60)
def test_waveform_bounded(bits, edge, shape):
    f = ook_waveform(bits, edge, np.linspace(-1, 1, 301), shape)
    assert np.all(f >= -1e-12) and np.all(f <= 1 + 1e-12)


def test_waveform_periodic():
    t = np.linspace(-1, 1, 11)
    f = ook_waveform([1, 0, 0, 1, 1, 0], 0.5, t, "erf")
    assert f[0] == pytest.approx(f[-1], abs=1e-12)


# ---- gridded field ---------------------------------------------------

def test_gridded_field_csv_roundtrip(tmp_path):
    g = build_grid(6, 3, 6)
    rng = np.random.default_rng(0)
    fld = GriddedField.from_complex(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
    fld.to_csv(tmp_path / "f.csv")
    back = GriddedField.from_csv(tmp_path / "f.csv", n_initial=6)
    assert back.grid == g
    assert np.array_equal(back.values, fld.values)
    header = (tmp_path / "f.csv").read_text().splitlines()[0]
    assert header == "t,zeta,s_real,s_imag"


def test_gridded_field_shape_checked():
    g = build_grid(6, 3, 2)
    with pytest.raises(InvalidGridError):
        GriddedField(g, np.zeros((2, 6)), np.zeros((3, 6)))
