"""
Normalized fiber equation and the split-step reference
======================================================

A standard single-mode fiber is described by loss, dispersion and a Kerr
nonlinearity. Rescaling time by the bit slot and distance by the span
turns the propagation equation into one whose coefficients depend on the
bit rate only. This script prints those coefficients across rates, then
propagates an on-off-keyed pattern with the split-step solver and checks
that the result satisfies the rescaled equation.

Run with ``python notebooks/01_normalization_and_oracle.py``.
"""

import numpy as np

from fiberpinn import (
    SignalSpec,
    build_grid,
    coefficients_for_rate,
    compute_normalization,
    derive_fiber_params,
    nlse_residual_fd,
    reference_solution,
)

###############################################################################
# Fiber constants and lengths
# ---------------------------
# The defaults are standard single-mode fiber values at 1550 nm.

fiber = derive_fiber_params()
print(f"gamma = {fiber.gamma:.4e} 1/(W m)")

spec = SignalSpec(bit_rate=10e9)
nmap = compute_normalization(fiber, spec)
print(f"at 10 Gb/s: L_D = {nmap.l_d / 1e3:.1f} km, L_NL = {nmap.l_nl / 1e3:.1f} km")

###############################################################################
# Coefficients across bit rates
# -----------------------------
# Dispersion grows with the square of the rate relative to the span, so the
# effective dispersion term swings over several decades between 2 and
# 50 Gb/s while the nonlinear term stays fixed.

print(f"\n{'rate':>8} {'atten':>10} {'disp':>10} {'third':>10} {'nonlin':>10}")
for rate in (2e9, 10e9, 25e9, 50e9):
    co = coefficients_for_rate(fiber, spec, rate)
    print(f"{rate / 1e9:6.0f}G {co.attenuation:10.3e} {co.dispersion:10.3e} "
          f"{co.third_order:10.3e} {co.nonlinear:10.3e}")

###############################################################################
# Split-step reference and the finite-difference residual
# -------------------------------------------------------
# The split-step field is sampled on a uniform grid and plugged into the
# rescaled equation with finite differences. The residual shrinks when the
# grid is refined, which is the consistency check between the two forms of
# the equation.

for rate in (2e9, 10e9, 50e9):
    co = coefficients_for_rate(fiber, SignalSpec(rate), rate)
    rel = []
    for n_t, n_z, m in [(257, 501, 1024), (513, 1001, 2048)]:
        grid = build_grid(n_t, n_z, 2)
        field, _ = reference_solution(fiber, SignalSpec(rate), grid, 1e5,
                                      n_time_samples=m, step_length=1e5 / (n_z - 1))
        rel.append(nlse_residual_fd(field, co) / np.mean(np.abs(field.values) ** 2))
    print(f"{rate / 1e9:4.0f}G relative residual {rel[0]:.2e} -> {rel[1]:.2e}")
