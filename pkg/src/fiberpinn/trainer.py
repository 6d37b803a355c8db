"""Training of a single basis network at a fixed bit rate."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, InvalidConfigError
from .network import AdamState, DerivativeBundle, adam_update, forward, loss_gradient
from .physical_model import GriddedField, nlse_residual

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 40000
    loss_threshold: float = 1e-4
    learning_rate: float = 1e-3
    beta_a: float = 0.9
    beta_b: float = 0.999
    epsilon: float = 1e-8
    residual_weight: float = 1.0
    boundary_weight: float = 1.0
    batch_size: int | None = None
    batch_seed: int = 0
    log_every: int = 1000

    def __post_init__(self):
        if self.max_epochs < 1:
            raise InvalidConfigError("max_epochs must be >= 1")
        if not self.loss_threshold > 0:
            raise InvalidConfigError("loss_threshold must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise InvalidConfigError("batch_size must be positive")


@dataclass(frozen=True, eq=False)
class TrainedBasis:
    bit_rate: float
    params: object
    final_loss: float
    loss_history: np.ndarray
    epochs_run: int
    residual_history: np.ndarray = field(default_factory=lambda: np.empty(0))
    boundary_history: np.ndarray = field(default_factory=lambda: np.empty(0))
    adam_state: object = None

    def write_log(self, path):
        """Training log with columns ``epoch, total, residual_term, boundary_term``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "total", "residual_term", "boundary_term"])
            for k, row in enumerate(zip(self.loss_history, self.residual_history,
                                        self.boundary_history), start=1):
                w.writerow([k] + [repr(float(v)) for v in row])


class PinnLoss:
    """Residual-plus-boundary loss over a collocation set.

    Residual term: mean over the collocation points of ``|NLSE lhs|^2``.
    Boundary term: mean over the ``zeta = 0`` samples of ``|s - f|^2``.
    Called with the :class:`DerivativeBundle` at :attr:`t`, :attr:`zeta`
    it returns ``(loss, cotangent)``, the form :func:`loss_gradient` needs.
    """

    def __init__(self, coeffs, grid, f, residual_weight=1.0, boundary_weight=1.0,
                 subset=None):
        f = np.asarray(f)
        if f.shape == (grid.n_t,) and grid.n_t != grid.n_initial:
            # full t-node sampling given, keep the boundary nodes
            f = f[grid.initial_index]
        if f.shape != (grid.n_initial,):
            raise InvalidConfigError(
                f"boundary data has shape {f.shape}, grid has {grid.n_initial} initial nodes")
        self.coeffs = coeffs
        self.grid = grid
        self.f = f.astype(complex)
        self.residual_weight = residual_weight
        self.boundary_weight = boundary_weight
        tt, zz = grid.points()
        bidx = grid.initial_flat_index()
        if subset is None:
            self.t, self.zeta = tt, zz
            self.residual_index = slice(None)
            self.n_residual = tt.size
            self.boundary_index = bidx
        else:
            # residual on the subset, boundary nodes appended at the end
            subset = np.asarray(subset)
            self.t = np.concatenate([tt[subset], tt[bidx]])
            self.zeta = np.concatenate([zz[subset], zz[bidx]])
            self.residual_index = slice(0, subset.size)
            self.n_residual = subset.size
            self.boundary_index = np.arange(subset.size, subset.size + bidx.size)

    def terms(self, bundle):
        s = bundle.complex("value")[self.residual_index]
        r = nlse_residual(self.coeffs, s,
                          bundle.complex("d_zeta")[self.residual_index],
                          bundle.complex("d_tt")[self.residual_index],
                          bundle.complex("d_ttt")[self.residual_index])
        e = bundle.complex("value")[self.boundary_index] - self.f
        return r, e

    def evaluate(self, bundle):
        r, e = self.terms(bundle)
        res = float(np.mean(r.real ** 2 + r.imag ** 2))
        bnd = float(np.mean(e.real ** 2 + e.imag ** 2))
        return self.residual_weight * res + self.boundary_weight * bnd, res, bnd

    def __call__(self, bundle):
        r, e = self.terms(bundle)
        co = self.coeffs
        n = bundle.value.shape[0]
        s = bundle.value[self.residual_index]
        u, v = s[:, 0], s[:, 1]
        sc = u + 1j * v
        p = u * u + v * v
        # d loss / d x = 2 Re(conj(r) * dr/dx) / N for each real input x
        g = 2.0 * self.residual_weight / self.n_residual * np.conj(r)
        nl = co.nonlinear

        def part(rho):
            return (g * rho).real

        cot = DerivativeBundle.zeros(n)
        ri = self.residual_index
        cot.value[ri, 0] = part(1j * co.attenuation + nl * (2 * u * sc + p))
        cot.value[ri, 1] = part(-co.attenuation + nl * (2 * v * sc + 1j * p))
        cot.d_zeta[ri, 0] = part(1j * co.a1)
        cot.d_zeta[ri, 1] = part(-co.a1)
        cot.d_tt[ri, 0] = part(co.dispersion)
        cot.d_tt[ri, 1] = part(1j * co.dispersion)
        cot.d_ttt[ri, 0] = part(1j * co.third_order)
        cot.d_ttt[ri, 1] = part(-co.third_order)
        gb = 2.0 * self.boundary_weight / e.size
        cot.value[self.boundary_index, 0] += gb * e.real
        cot.value[self.boundary_index, 1] += gb * e.imag
        res = float(np.mean(r.real ** 2 + r.imag ** 2))
        bnd = float(np.mean(e.real ** 2 + e.imag ** 2))
        self.last_terms = (res, bnd)
        return self.residual_weight * res + self.boundary_weight * bnd, cot


def pinn_loss(params, coeffs, grid, f, residual_weight=1.0, boundary_weight=1.0):
    """``(total, residual_term, boundary_term)`` for one network."""
    from .network import input_derivatives

    ev = PinnLoss(coeffs, grid, f, residual_weight, boundary_weight)
    bundle = input_derivatives(params, ev.t, ev.zeta)
    total, res, bnd = ev.evaluate(bundle)
    if not np.isfinite(total):
        r, e = ev.terms(bundle)
        bad = np.flatnonzero(~np.isfinite(r))
        where = (f" first bad node t={ev.t[bad[0]]:.6g}, zeta={ev.zeta[bad[0]]:.6g}"
                 if bad.size else "")
        raise DivergenceError(f"non-finite loss{where}", last_finite=params)
    return total, res, bnd


def train_basis(init, coeffs, grid, f, cfg=TrainConfig(), state=None):
    """Full-batch Adam on the PINN loss.

    Each epoch evaluates the loss at the current parameters and records it;
    training stops as soon as that loss is below ``cfg.loss_threshold`` or
    ``cfg.max_epochs`` losses have been recorded. The returned parameters
    are the ones whose loss is ``final_loss``.

    Passing the ``state`` saved with a checkpoint resumes the optimizer;
    ``cfg.max_epochs`` then counts the additional epochs.
    """
    rng = np.random.default_rng(cfg.batch_seed)
    minibatch = cfg.batch_size is not None and cfg.batch_size < grid.n_g
    if not minibatch:
        ev = PinnLoss(coeffs, grid, f, cfg.residual_weight, cfg.boundary_weight)
    if state is None:
        state = AdamState.fresh(init.n_params, cfg.learning_rate, cfg.beta_a, cfg.beta_b,
                                cfg.epsilon)
    params = init
    totals, residuals, boundaries = [], [], []
    for epoch in range(1, cfg.max_epochs + 1):
        if minibatch:
            subset = np.sort(rng.choice(grid.n_g, size=cfg.batch_size, replace=False))
            ev = PinnLoss(coeffs, grid, f, cfg.residual_weight, cfg.boundary_weight,
                          subset=subset)
        try:
            loss, grad = loss_gradient(params, ev)
        except DivergenceError as err:
            raise DivergenceError(f"training diverged at epoch {epoch}: {err}",
                                  last_finite=params, step=epoch) from err
        totals.append(loss)
        residuals.append(ev.last_terms[0])
        boundaries.append(ev.last_terms[1])
        if cfg.log_every and epoch % cfg.log_every == 0:
            log.info("rate %.4g epoch %d loss %.3e (res %.3e, bnd %.3e)",
                     getattr(coeffs, "bit_rate", float("nan")), epoch, loss, *ev.last_terms)
        if loss < cfg.loss_threshold or epoch == cfg.max_epochs:
            break
        theta, state = adam_update(params.theta, grad, state)
        params = params.with_theta(theta)
    return TrainedBasis(bit_rate=getattr(coeffs, "bit_rate", float("nan")), params=params,
                        final_loss=totals[-1], loss_history=np.array(totals),
                        epochs_run=len(totals), residual_history=np.array(residuals),
                        boundary_history=np.array(boundaries), adam_state=state)


def evaluate_on_grid(params, grid):
    tt, zz = grid.points()
    s_r, s_i = forward(params, tt, zz)
    return GriddedField(grid, s_r.reshape(grid.shape), s_i.reshape(grid.shape))
