"""Multiply-accumulate counts for the SSFM, per-rate PINNs and the reduced-basis model.

The two network counts do not depend on distance: a trained network maps
``(t, zeta)`` straight to the field, so reaching 100 km costs the same as
reaching 1 km. The SSFM count grows with the number of computing units
``l_max / l_unit``.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace

from .errors import InvalidParameterError


@dataclass(frozen=True)
class ComplexityParams:
    """Inputs of the MAC models.

    ``n_dispersion`` and ``n_nonlinear`` are the per-unit MAC counts of the
    SSFM linear and nonlinear steps; ``None`` means ``6 * m_t`` (one complex
    multiply per frequency bin) and ``8 * m_t`` (power, phase and complex
    rotation per sample).
    """

    n_rates: int = 91
    m_t: int = 1024
    m_zeta: int = 11
    l_max: float = 1e5
    l_unit: float = 1e3
    hidden_layers: int = 5
    neurons: int = 100
    n_bases: int = 12
    n_dispersion: float | None = None
    n_nonlinear: float | None = None

    def __post_init__(self):
        for name in ("n_rates", "m_t", "m_zeta", "hidden_layers", "neurons"):
            if getattr(self, name) < 1:
                raise InvalidParameterError(f"{name} must be >= 1")
        if self.n_bases < 0:
            raise InvalidParameterError("n_bases must be >= 0")
        if not self.l_unit > 0:
            raise InvalidParameterError("l_unit must be positive")
        if self.l_max < 0:
            raise InvalidParameterError("l_max must be non-negative")

    @property
    def dispersion_macs(self):
        return 6 * self.m_t if self.n_dispersion is None else self.n_dispersion

    @property
    def nonlinear_macs(self):
        return 8 * self.m_t if self.n_nonlinear is None else self.n_nonlinear


def mac_ssfm(p):
    """``T * (L_max / L_u) * (4 M_t log2 M_t + N_disp + N_nl)``."""
    m = p.m_t
    if m & (m - 1):
        warnings.warn(f"m_t={m} is not a power of two; FFT count is nominal", stacklevel=2)
    per_unit = 4 * m * math.log2(m) + p.dispersion_macs + p.nonlinear_macs
    return p.n_rates * (p.l_max / p.l_unit) * per_unit


def mac_pinn_per_rate_family(p):
    """One network per rate: ``2 T P + T (K - 1) P^2``."""
    return 2 * p.n_rates * p.neurons + p.n_rates * (p.hidden_layers - 1) * p.neurons ** 2


def mac_parameterized(p):
    """``N_b`` shared bases plus the combination: ``2 N_b P + N_b (K - 1) P^2 + 2 N_b``."""
    nb, k, n = p.n_bases, p.hidden_layers, p.neurons
    return 2 * nb * n + nb * (k - 1) * n ** 2 + 2 * nb


def comparison_table(p, distances):
    """Rows ``(distance_m, c_ssfm, c_f, c_pf)`` sorted by distance."""
    distances = sorted(float(d) for d in distances)
    if not distances:
        raise InvalidParameterError("distances must be non-empty")
    c_f = mac_pinn_per_rate_family(p)
    c_pf = mac_parameterized(p)
    return [(d, mac_ssfm(replace(p, l_max=d)), c_f, c_pf) for d in distances]


def write_table_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["distance_m", "c_ssfm", "c_f", "c_pf"])
        for d, a, b, c in rows:
            w.writerow([repr(float(d)), repr(float(a)), b, c])
