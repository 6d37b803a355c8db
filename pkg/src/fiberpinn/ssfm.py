"""Split-step Fourier reference solver and finite-difference NLSE residual."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, DivergenceError, InvalidConfigError, InvalidGridError
from .physical_model import GriddedField, compute_normalization, nlse_residual, ook_waveform


@dataclass(frozen=True)
class SsfmConfig:
    """Integrator settings.

    ``window`` is the full periodic time window ``2 T_max`` in seconds.
    ``scheme`` is ``"symmetric"`` (Strang, second order) or ``"simple"``
    (linear step then nonlinear step, first order).
    """

    step_length: float
    n_time_samples: int
    window: float
    scheme: str = "symmetric"

    def __post_init__(self):
        m = self.n_time_samples
        if not self.step_length > 0:
            raise InvalidConfigError("step_length must be positive")
        if m < 8 or m & (m - 1):
            raise InvalidConfigError(f"n_time_samples must be a power of two >= 8, got {m}")
        if not self.window > 0:
            raise InvalidConfigError("window must be positive")
        if self.scheme not in ("symmetric", "simple"):
            raise InvalidConfigError(f"unknown scheme {self.scheme!r}")

    @property
    def dt(self):
        return self.window / self.n_time_samples

    def time_axis(self):
        """Sample times ``[-window/2, window/2)``."""
        m = self.n_time_samples
        return (np.arange(m) - m // 2) * self.dt

    def angular_frequencies(self):
        return 2.0 * math.pi * np.fft.fftfreq(self.n_time_samples, self.dt)


@dataclass(frozen=True, eq=False)
class FieldEvolution:
    z: np.ndarray  # (n_snap,)
    fields: np.ndarray  # (n_snap, n_time_samples), sqrt(W)
    time: np.ndarray  # (n_time_samples,)
    window: float

    def to_csv(self, path):
        """Columns ``z_m, sample_index, re, im``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["z_m", "sample_index", "re", "im"])
            for z, row in zip(self.z, self.fields):
                for k, v in enumerate(row):
                    w.writerow([repr(float(z)), k, repr(float(v.real)), repr(float(v.imag))])


def linear_operator(fiber, omega):
    """Frequency-domain generator of the linear part of the physical NLSE.

    With ``S(T) = sum S_w exp(i w T)``, ``d/dT -> i w`` and the linear terms
    of ``dS/dz = -alpha/2 S - i beta2/2 S_TT + beta3/6 S_TTT`` become the
    multiplier returned here.
    """
    return (-fiber.alpha / 2.0
            + 0.5j * fiber.beta2 * omega ** 2
            - 1j * fiber.beta3 / 6.0 * omega ** 3)


def _segments(distance, snapshot_distances):
    marks = sorted(set(float(d) for d in snapshot_distances) | {0.0, float(distance)})
    return marks


def propagate(launch, fiber, distance, cfg, snapshot_distances=()):
    """Integrate the physical NLSE from ``z = 0`` to ``distance``.

    Steps have length ``cfg.step_length``; the last step before each
    requested snapshot distance is shortened to land on it exactly. The
    returned evolution always contains ``z = 0`` and ``z = distance``.
    """
    launch = np.asarray(launch, dtype=complex)
    if launch.shape != (cfg.n_time_samples,):
        raise InvalidConfigError(
            f"launch has {launch.shape} samples, config expects {cfg.n_time_samples}")
    if distance < 0:
        raise InvalidConfigError("distance must be non-negative")
    if any(d < 0 or d > distance for d in snapshot_distances):
        raise CoverageError("snapshot distances must lie in [0, distance]")

    omega = cfg.angular_frequencies()
    gen = linear_operator(fiber, omega)
    gamma = fiber.gamma
    symmetric = cfg.scheme == "symmetric"
    cache = {}

    def lin(h):
        if h not in cache:
            cache[h] = np.exp(gen * h)
        return cache[h]

    marks = _segments(distance, snapshot_distances)
    zs = [0.0]
    out = [launch.copy()]
    a = launch.copy()
    step = 0
    for z0, z1 in zip(marks[:-1], marks[1:]):
        seg = z1 - z0
        n_full = int(math.floor(seg / cfg.step_length * (1 + 1e-12)))
        rest = seg - n_full * cfg.step_length
        hs = [cfg.step_length] * n_full
        if rest > 1e-12 * seg:
            hs.append(rest)
        for h in hs:
            # overflow surfaces as non-finite samples, checked below
            with np.errstate(over="ignore", invalid="ignore"):
                if symmetric:
                    a = np.fft.ifft(lin(h / 2) * np.fft.fft(a))
                    a = a * np.exp(1j * gamma * (a.real ** 2 + a.imag ** 2) * h)
                    a = np.fft.ifft(lin(h / 2) * np.fft.fft(a))
                else:
                    a = np.fft.ifft(lin(h) * np.fft.fft(a))
                    a = a * np.exp(1j * gamma * (a.real ** 2 + a.imag ** 2) * h)
            step += 1
            if not np.all(np.isfinite(a)):
                raise DivergenceError(f"non-finite field at step {step} (segment ending {z1:.6g} m)",
                                      last_finite=out[-1], step=step)
        zs.append(z1)
        out.append(a.copy())
    return FieldEvolution(np.array(zs), np.array(out), cfg.time_axis(), cfg.window)


def to_normalized(ev, nmap, grid):
    """Resample an evolution onto ``grid`` in normalized units.

    Each ``zeta`` node must coincide with a snapshot at ``L_max * zeta``;
    times are linearly interpolated (periodically over the window).
    """
    if 2.0 * nmap.t_max > ev.window * (1 + 1e-12):
        raise CoverageError("evolution time window does not cover [-t_max, t_max]")
    rows = []
    t_phys = grid.t_nodes * nmap.t_max
    for zeta in grid.zeta_nodes:
        z = nmap.l_max * zeta
        k = int(np.argmin(np.abs(ev.z - z)))
        if abs(ev.z[k] - z) > 1e-9 * max(nmap.l_max, 1.0):
            raise CoverageError(f"no snapshot at z={z:.6g} m (zeta={zeta:.6g})")
        f = ev.fields[k]
        re = np.interp(t_phys, ev.time, f.real, period=ev.window)
        im = np.interp(t_phys, ev.time, f.imag, period=ev.window)
        rows.append(re + 1j * im)
    return GriddedField.from_complex(grid, np.array(rows) / math.sqrt(nmap.p0))


def nlse_residual_fd(field, coeffs, grid=None):
    """Mean squared normalized-NLSE residual by central differences.

    Evaluated on interior nodes: ``zeta`` nodes ``1..n-2`` and ``t`` nodes
    ``2..n-3`` (the third-derivative stencil needs two neighbours).
    """
    grid = field.grid if grid is None else grid
    if grid.n_t < 8 or grid.n_zeta < 3:
        raise InvalidGridError("finite-difference residual needs n_t >= 8 and n_zeta >= 3")
    s = field.values
    ht, hz = grid.dt, grid.dzeta
    c = s[1:-1, 2:-2]
    s_zeta = (s[2:, 2:-2] - s[:-2, 2:-2]) / (2 * hz)
    mid = s[1:-1]
    s_tt = (mid[:, 3:-1] - 2 * mid[:, 2:-2] + mid[:, 1:-3]) / ht ** 2
    s_ttt = (mid[:, 4:] - 2 * mid[:, 3:-1] + 2 * mid[:, 1:-3] - mid[:, :-4]) / (2 * ht ** 3)
    r = nlse_residual(coeffs, c, s_zeta, s_tt, s_ttt)
    return float(np.mean(r.real ** 2 + r.imag ** 2))


def reference_solution(fiber, spec, grid, l_max, t_max=None, n_time_samples=2048,
                       step_length=None, scheme="symmetric", launch_fn=None):
    """Normalized SSFM solution for one bit rate, sampled on ``grid``.

    ``launch_fn`` maps normalized time to the normalized launch waveform;
    by default the OOK pattern of ``spec``.
    """
    nmap = compute_normalization(fiber, spec, l_max=l_max, t_max=t_max)
    if step_length is None:
        step_length = l_max / 1000.0
    cfg = SsfmConfig(step_length=step_length, n_time_samples=n_time_samples,
                     window=2.0 * nmap.t_max, scheme=scheme)
    t_norm = cfg.time_axis() / nmap.t_max
    if launch_fn is None:
        shape = ook_waveform(spec.pattern, spec.edge_fraction, t_norm, spec.edge_shape)
    else:
        shape = launch_fn(t_norm)
    launch = math.sqrt(nmap.p0) * np.asarray(shape, dtype=complex)
    ev = propagate(launch, fiber, l_max, cfg, snapshot_distances=l_max * grid.zeta_nodes)
    return to_normalized(ev, nmap, grid), nmap


