"""Dispersion-only Gaussian problem with a closed-form solution.

``i s_zeta + D s_tt = 0`` with ``s(t, 0) = exp(-t^2 / (2 w^2))`` has

    s(t, zeta) = w / sqrt(w^2 + 2 i D zeta) * exp(-t^2 / (2 (w^2 + 2 i D zeta)))

which makes it a cheap end-to-end check of the PINN machinery.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .physical_model import GriddedField, NlseCoefficients


@dataclass(frozen=True)
class DispersionToy:
    width: float = 0.2
    dispersion: float = 0.02

    def __post_init__(self):
        if not self.width > 0:
            raise InvalidParameterError("width must be positive")
        if not self.dispersion > 0:
            raise InvalidParameterError("dispersion must be positive")

    def coefficients(self):
        # a3 = 1/2 with kappa1 = 1 gives an effective t-diffusion 0.5 / kappa2^2
        return NlseCoefficients(1.0, 0.0, 0.5, 0.0, 0.0, kappa1=1.0,
                                kappa2=math.sqrt(0.5 / self.dispersion))

    def boundary(self, grid):
        t = grid.t_nodes
        return np.exp(-t ** 2 / (2 * self.width ** 2))

    def exact(self, t, zeta):
        q = self.width ** 2 + 2j * self.dispersion * np.asarray(zeta)
        return self.width / np.sqrt(q) * np.exp(-np.asarray(t) ** 2 / (2 * q))

    def exact_field(self, grid):
        tt, zz = grid.points()
        return GriddedField.from_complex(grid, self.exact(tt, zz))
