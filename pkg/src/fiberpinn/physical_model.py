"""Fiber constants, the bit-rate normalization and the normalized NLSE.

The physical field ``S(T, z)`` (units of sqrt(W)) obeys

    i dS/dz + i alpha/2 S - beta2/2 d2S/dT2 - i beta3/6 d3S/dT3 + gamma |S|^2 S = 0

and is mapped onto the unit box ``t in [-1, 1]``, ``zeta in [0, 1]`` by

    z = L_max zeta,   T = T_max t = (kappa2 / R_b) t,   S = sqrt(P0) s.

Substituting and multiplying through by ``L_max`` gives the normalized
equation whose coefficients are produced by :func:`compute_coefficients`::

    i a1 ds/dzeta + i k1 a2 s + k1 a3 / k2^2 d2s/dt2
        + i k1 a4 / k2^3 d3s/dt3 + k1 a5 |s|^2 s = 0
"""
from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.special import erfc

from .errors import (
    DegenerateDispersionError,
    InvalidGridError,
    InvalidParameterError,
)

# Standard single-mode fiber constants.
TABLE_ALPHA = 4.605e-5  # 1/m
TABLE_BETA2 = -2e-26  # s^2/m
TABLE_BETA3 = -2e-38  # s^3/m
TABLE_N2 = 2.6e-20  # m^2/W
TABLE_A_EFF = 8e-11  # m^2
TABLE_LAMBDA = 1.55e-6  # m

DEFAULT_PEAK_POWER = 1e-2  # W
DEFAULT_L_MAX = 1e5  # m
DEFAULT_EDGE_FRACTION = 0.5
DEFAULT_EDGE_SHAPE = "erf"
DEFAULT_PATTERN_BITS = 16
DEFAULT_PATTERN_SEED = 2024


@dataclass(frozen=True)
class FiberParams:
    alpha: float
    beta2: float
    beta3: float
    n2: float
    a_eff: float
    lambda_c: float
    gamma: float

    @property
    def omega_c(self):
        return 2.0 * math.pi * SPEED_OF_LIGHT / self.lambda_c


def derive_fiber_params(alpha=TABLE_ALPHA, beta2=TABLE_BETA2, beta3=TABLE_BETA3,
                        n2=TABLE_N2, a_eff=TABLE_A_EFF, lambda_c=TABLE_LAMBDA):
    """Build :class:`FiberParams`, computing ``gamma = n2 omega_c / (c A_eff)``.

    Defaults are the standard single-mode fiber values used throughout the
    package.
    """
    if not a_eff > 0:
        raise InvalidParameterError(f"a_eff must be positive, got {a_eff!r}")
    if not lambda_c > 0:
        raise InvalidParameterError(f"lambda_c must be positive, got {lambda_c!r}")
    if alpha < 0:
        raise InvalidParameterError(f"alpha must be non-negative, got {alpha!r}")
    if n2 < 0:
        raise InvalidParameterError(f"n2 must be non-negative, got {n2!r}")
    omega_c = 2.0 * math.pi * SPEED_OF_LIGHT / lambda_c
    gamma = n2 * omega_c / (SPEED_OF_LIGHT * a_eff)
    return FiberParams(float(alpha), float(beta2), float(beta3), float(n2),
                       float(a_eff), float(lambda_c), gamma)


@dataclass(frozen=True)
class SignalSpec:
    bit_rate: float
    peak_power: float = DEFAULT_PEAK_POWER
    pattern: tuple = field(default_factory=lambda: default_pattern())
    edge_fraction: float = DEFAULT_EDGE_FRACTION
    edge_shape: str = DEFAULT_EDGE_SHAPE

    def __post_init__(self):
        object.__setattr__(self, "pattern", tuple(int(b) for b in self.pattern))
        if not self.bit_rate > 0:
            raise InvalidParameterError("bit_rate must be positive")
        if not self.peak_power > 0:
            raise InvalidParameterError("peak_power must be positive")
        if len(self.pattern) == 0:
            raise InvalidParameterError("pattern must be non-empty")
        if any(b not in (0, 1) for b in self.pattern):
            raise InvalidParameterError("pattern entries must be 0 or 1")
        if not 0.0 <= self.edge_fraction <= 0.5:
            raise InvalidParameterError("edge_fraction must lie in [0, 0.5]")
        if self.edge_shape not in ("erf", "raised_cosine"):
            raise InvalidParameterError(f"unknown edge shape {self.edge_shape!r}")

    def filling_t_max(self):
        """Half window that makes the whole pattern span ``t in [-1, 1]``."""
        return len(self.pattern) / (2.0 * self.bit_rate)


def default_pattern(n_bits=DEFAULT_PATTERN_BITS, seed=DEFAULT_PATTERN_SEED):
    """Fixed pseudo-random OOK pattern, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    return tuple(int(b) for b in rng.integers(0, 2, size=n_bits))


@dataclass(frozen=True)
class NormalizationMap:
    l_d: float
    l_nl: float
    l_max: float
    t_max: float
    kappa1: float
    kappa2: float
    p0: float
    bit_rate: float


def compute_normalization(fiber, spec, l_max=DEFAULT_L_MAX, t_max=None):
    """Length, time and amplitude scales for one bit rate.

    ``t_max=None`` selects the half window that the pattern exactly fills,
    ``len(pattern) / (2 R_b)``; this keeps ``f(t)`` independent of the bit
    rate and ``kappa2`` equal to half the pattern length.
    """
    if fiber.beta2 == 0:
        raise DegenerateDispersionError("beta2 = 0: dispersion length undefined")
    if t_max is None:
        t_max = spec.filling_t_max()
    if not l_max > 0 or not t_max > 0:
        raise InvalidParameterError("l_max and t_max must be positive")
    r_b = spec.bit_rate
    l_d = 1.0 / (r_b ** 2 * abs(fiber.beta2))
    gp = fiber.gamma * spec.peak_power
    if not math.isfinite(gp) or not math.isfinite(l_d):
        raise InvalidParameterError("gamma * P0 or the dispersion length is not finite")
    l_nl = 1.0 / gp if gp > 0 else math.inf
    return NormalizationMap(l_d=l_d, l_nl=l_nl, l_max=float(l_max), t_max=float(t_max),
                            kappa1=l_max / l_d, kappa2=t_max * r_b,
                            p0=spec.peak_power, bit_rate=r_b)


@dataclass(frozen=True)
class NlseCoefficients:
    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    kappa1: float
    kappa2: float
    bit_rate: float = math.nan

    @property
    def attenuation(self):
        """Multiplier of ``i s``."""
        return self.kappa1 * self.a2

    @property
    def dispersion(self):
        """Multiplier of ``d2s/dt2``."""
        return self.kappa1 * self.a3 / self.kappa2 ** 2

    @property
    def third_order(self):
        """Multiplier of ``i d3s/dt3``."""
        return self.kappa1 * self.a4 / self.kappa2 ** 3

    @property
    def nonlinear(self):
        """Multiplier of ``|s|^2 s``."""
        return self.kappa1 * self.a5


def compute_coefficients(nmap, fiber, bit_rate=None):
    """Normalized-equation coefficients ``a1..a5`` for one bit rate."""
    r_b = nmap.bit_rate if bit_rate is None else float(bit_rate)
    l_d = nmap.l_d
    a2 = fiber.alpha * l_d / 2.0
    a3 = -float(np.sign(fiber.beta2)) / 2.0
    a4 = -fiber.beta3 * l_d * r_b ** 3 / 6.0
    a5 = l_d / nmap.l_nl  # 0 when l_nl is infinite
    return NlseCoefficients(a1=1.0, a2=a2, a3=a3, a4=a4, a5=a5,
                            kappa1=nmap.kappa1, kappa2=nmap.kappa2, bit_rate=r_b)


def coefficients_for_rate(fiber, spec, bit_rate, l_max=DEFAULT_L_MAX, t_max=None):
    """Shortcut: normalization plus coefficients for ``spec`` moved to ``bit_rate``."""
    moved = dataclasses.replace(spec, bit_rate=bit_rate)
    nmap = compute_normalization(fiber, moved, l_max=l_max, t_max=t_max)
    return compute_coefficients(nmap, fiber, bit_rate)


def nlse_residual(coeffs, s, s_zeta, s_tt, s_ttt):
    """Pointwise left-hand side of the normalized NLSE (complex arrays)."""
    return (1j * coeffs.a1 * s_zeta
            + 1j * coeffs.attenuation * s
            + coeffs.dispersion * s_tt
            + 1j * coeffs.third_order * s_ttt
            + coeffs.nonlinear * (s.real ** 2 + s.imag ** 2) * s)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform collocation grid on ``[-1, 1] x [0, 1]``.

    Gridded arrays are laid out as ``(n_zeta, n_t)``; flattened collocation
    points follow the same C order. ``initial_index`` picks the ``N_ini``
    boundary samples out of ``t_nodes``.
    """

    t_nodes: np.ndarray
    zeta_nodes: np.ndarray
    initial_index: np.ndarray

    def __post_init__(self):
        t, zeta = self.t_nodes, self.zeta_nodes
        if t.ndim != 1 or zeta.ndim != 1 or t.size < 2 or zeta.size < 2:
            raise InvalidGridError("grid needs at least two nodes per axis")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(zeta) <= 0):
            raise InvalidGridError("grid nodes must be strictly increasing")
        if t[0] < -1 or t[-1] > 1 or zeta[0] != 0 or zeta[-1] > 1:
            raise InvalidGridError("grid nodes outside [-1, 1] x [0, 1]")

    @property
    def n_t(self):
        return self.t_nodes.size

    @property
    def n_zeta(self):
        return self.zeta_nodes.size

    @property
    def n_initial(self):
        return self.initial_index.size

    @property
    def n_g(self):
        return self.n_t * self.n_zeta

    @property
    def shape(self):
        return (self.n_zeta, self.n_t)

    @property
    def dt(self):
        return self.t_nodes[1] - self.t_nodes[0]

    @property
    def dzeta(self):
        return self.zeta_nodes[1] - self.zeta_nodes[0]

    @property
    def initial_t(self):
        return self.t_nodes[self.initial_index]

    def points(self):
        """Flattened ``(t, zeta)`` collocation coordinates."""
        zz, tt = np.meshgrid(self.zeta_nodes, self.t_nodes, indexing="ij")
        return tt.ravel(), zz.ravel()

    def initial_flat_index(self):
        """Positions of the ``zeta = 0`` boundary samples among :meth:`points`."""
        return self.initial_index.copy()  # row zeta=0 comes first

    def __eq__(self, other):
        return (isinstance(other, Grid)
                and np.array_equal(self.t_nodes, other.t_nodes)
                and np.array_equal(self.zeta_nodes, other.zeta_nodes)
                and np.array_equal(self.initial_index, other.initial_index))

    __hash__ = None


def build_grid(n_t=312, n_zeta=11, n_initial=100):
    if n_t < 2 or n_zeta < 2 or n_initial < 1 or n_initial > n_t:
        raise InvalidGridError(
            f"invalid grid counts (n_t={n_t}, n_zeta={n_zeta}, n_initial={n_initial})")
    t = np.linspace(-1.0, 1.0, n_t)
    zeta = np.linspace(0.0, 1.0, n_zeta)
    idx = np.unique(np.round(np.linspace(0, n_t - 1, n_initial)).astype(int))
    return Grid(t, zeta, idx)


# 10%-90% rise time of a Gaussian-filtered step, in units of sigma.
_ERF_RISE = 2.0 * 1.2815515655446004


def ook_waveform(pattern, edge_fraction, t, edge_shape=DEFAULT_EDGE_SHAPE):
    """NRZ on-off keying on ``t in [-1, 1]``.

    Transitions sit on slot boundaries and take ``edge_fraction`` of a slot.
    ``edge_shape="erf"`` is a Gaussian-filtered step whose 10-90% rise time
    is the edge width (infinitely differentiable); ``"raised_cosine"`` is a
    compact half-cosine ramp (continuous first derivative only).

    The pattern is treated cyclically, so a transition also sits on the
    window edge when the last and first bits differ; this keeps the
    waveform periodic on the window, as the split-step solver assumes.
    """
    bits = np.asarray(pattern, dtype=float)
    n = bits.size
    slot = 2.0 / n
    t = np.asarray(t, dtype=float)
    u = (t + 1.0) / slot
    out = bits[np.floor(u).astype(int) % n]
    edge = edge_fraction * slot
    if edge <= 0:
        return out
    if edge_shape == "raised_cosine":
        j = np.round(u).astype(int)
        x = (u - j) * slot
        near = np.abs(x) < edge / 2
        prev = bits[(j - 1) % n]
        nxt = bits[j % n]
        ramp = 0.5 * (1.0 - np.cos(math.pi * (x + edge / 2) / edge))
        return np.where(near, prev + (nxt - prev) * ramp, out)
    if edge_shape == "erf":
        sigma = edge / _ERF_RISE
        # hard steps and their smoothing share the same distances, so both
        # agree on which side of a boundary a sample lies
        out = np.full(t.shape, bits[-1])
        for j in range(n):
            jump = bits[j] - bits[j - 1]
            if jump == 0:
                continue
            raw = t - (-1.0 + j * slot)
            # the image one period later reaches the window only at t = 1
            out += jump * ((raw >= 0).astype(float) + (raw >= 2.0))
            # signed distance to the nearest periodic image of boundary j
            d = np.where(raw > 1.0, raw - 2.0, np.where(raw < -1.0, raw + 2.0, raw))
            # a vanishing sigma overflows to +-inf, where erfc gives the hard step
            with np.errstate(over="ignore"):
                out += jump * (0.5 * erfc(-d / (math.sqrt(2.0) * sigma)) - (d >= 0))
        return out
    raise InvalidParameterError(f"unknown edge shape {edge_shape!r}")


def ook_initial_condition(pattern, edge_fraction, grid, edge_shape=DEFAULT_EDGE_SHAPE):
    """Boundary field ``f(t)`` on the grid's ``t`` nodes (real valued).

    There is no bit-rate argument: after normalization the launched
    waveform is the same for every bit rate.
    """
    if len(pattern) == 0:
        raise InvalidParameterError("pattern must be non-empty")
    return ook_waveform(pattern, edge_fraction, grid.t_nodes, edge_shape)


@dataclass(frozen=True, eq=False)
class GriddedField:
    grid: Grid
    real_part: np.ndarray
    imag_part: np.ndarray

    def __post_init__(self):
        if self.real_part.shape != self.grid.shape or self.imag_part.shape != self.grid.shape:
            raise InvalidGridError(
                f"field shape {self.real_part.shape} does not match grid {self.grid.shape}")

    @classmethod
    def from_complex(cls, grid, values):
        values = np.asarray(values, dtype=complex).reshape(grid.shape)
        return cls(grid, values.real.copy(), values.imag.copy())

    @property
    def values(self):
        return self.real_part + 1j * self.imag_part

    def relative_l2(self, other):
        """``||self - other|| / ||other||`` over all grid nodes."""
        diff = self.values - other.values
        return float(np.linalg.norm(diff) / np.linalg.norm(other.values))

    def to_csv(self, path):
        """Write columns ``t, zeta, s_real, s_imag``, one row per node."""
        tt, zz = self.grid.points()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "zeta", "s_real", "s_imag"])
            for row in zip(tt, zz, self.real_part.ravel(), self.imag_part.ravel()):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, n_initial=1):
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        t_nodes = np.unique(data[:, 0])
        zeta_nodes = np.unique(data[:, 1])
        idx = np.unique(np.round(np.linspace(0, t_nodes.size - 1, n_initial)).astype(int))
        grid = Grid(t_nodes, zeta_nodes, idx)
        return cls(grid, data[:, 2].reshape(grid.shape), data[:, 3].reshape(grid.shape))
