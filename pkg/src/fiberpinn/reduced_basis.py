"""Bit-rate-parameterized surrogate built from a few trained basis networks.

A prediction at bit rate ``R`` is ``s = sum_p c_p s_p`` where the ``s_p``
are basis networks trained at greedily chosen rates and ``c`` is fitted by
minimizing the PINN loss of the combined field under ``R``'s coefficients.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import DivergenceError, InvalidCoefficientsError, InvalidConfigError, OutOfRangeError
from .network import (
    COMPONENTS,
    AdamState,
    DerivativeBundle,
    adam_update,
    init_network,
    input_derivatives,
    load_checkpoint,
    save_checkpoint,
)
from .physical_model import GriddedField, coefficients_for_rate, ook_initial_condition
from .trainer import PinnLoss, TrainConfig, TrainedBasis, train_basis

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1


@dataclass(frozen=True, eq=False)
class FiberProblem:
    """The OOK transmission problem as a family over bit rate."""

    fiber: object
    signal: object
    grid: object
    l_max: float = 1e5
    t_max: float | None = None

    def coefficients(self, bit_rate):
        return coefficients_for_rate(self.fiber, self.signal, bit_rate,
                                     l_max=self.l_max, t_max=self.t_max)

    def boundary(self):
        return ook_initial_condition(self.signal.pattern, self.signal.edge_fraction,
                                     self.grid, self.signal.edge_shape)


@dataclass(frozen=True)
class NetworkConfig:
    layer_sizes: tuple = (2, 100, 100, 100, 100, 100, 2)
    seed: int = 0


@dataclass(frozen=True)
class FitConfig:
    """Adam settings for the combination coefficients."""

    max_iters: int = 2000
    learning_rate: float = 1e-2
    loss_threshold: float = 0.0
    grad_tol: float = 1e-9
    beta_a: float = 0.9
    beta_b: float = 0.999
    epsilon: float = 1e-8


@dataclass(frozen=True)
class GreedyConfig:
    max_bases: int = 12
    stop_loss: float = 1e-4
    first_rate: float | None = None  # None: lowest candidate

    def __post_init__(self):
        if self.max_bases < 1:
            raise InvalidConfigError("max_bases must be >= 1")


@dataclass(frozen=True, eq=False)
class FitResult:
    c: np.ndarray
    loss: float
    residual_term: float
    boundary_term: float
    history: np.ndarray
    grad_norm: float
    converged: bool  # gradient or loss criterion met at the returned c


def _basis_params(b):
    return b.params if isinstance(b, TrainedBasis) else b


class BasisTensors:
    """Basis outputs and input derivatives cached on a fixed point set.

    ``data`` has shape ``(n_components, n_bases, n_points, 2)`` in the
    component order of :data:`fiberpinn.network.COMPONENTS`.
    """

    def __init__(self, data, t, zeta):
        self.data = np.asarray(data, dtype=float)
        self.t = t
        self.zeta = zeta

    @classmethod
    def from_bases(cls, bases, t, zeta):
        bundles = [input_derivatives(_basis_params(b), t, zeta) for b in bases]
        data = np.stack([np.stack([getattr(bd, c) for bd in bundles]) for c in COMPONENTS])
        return cls(data, np.asarray(t), np.asarray(zeta))

    @classmethod
    def from_bundles(cls, bundles, t, zeta):
        data = np.stack([np.stack([getattr(bd, c) for bd in bundles]) for c in COMPONENTS])
        return cls(data, np.asarray(t), np.asarray(zeta))

    @property
    def n_bases(self):
        return self.data.shape[1]

    def combine(self, c):
        c = np.asarray(c, dtype=float)
        if c.shape != (self.n_bases,):
            raise InvalidCoefficientsError(
                f"{c.size} coefficients for {self.n_bases} bases")
        comb = np.einsum("p,kpnj->knj", c, self.data)
        return DerivativeBundle(*comb)

    def pullback(self, cot):
        """Gradient with respect to ``c`` of a loss with bundle cotangent ``cot``."""
        g = np.stack([getattr(cot, name) for name in COMPONENTS])
        return np.einsum("knj,kpnj->p", g, self.data)

    def appended(self, other):
        return BasisTensors(np.concatenate([self.data, other.data], axis=1), self.t, self.zeta)


def combined_field(bases, c, t, zeta):
    """Value and input derivatives of ``sum_p c_p s_p`` at ``(t, zeta)``."""
    c = np.asarray(c, dtype=float)
    if c.shape != (len(bases),):
        raise InvalidCoefficientsError(f"{c.size} coefficients for {len(bases)} bases")
    return BasisTensors.from_bases(bases, t, zeta).combine(c)


def _loss_and_grad(tensors, evaluator, c):
    bundle = tensors.combine(c)
    loss, cot = evaluator(bundle)
    return loss, evaluator.last_terms, tensors.pullback(cot)


def combination_loss(bases, c, coeffs, grid, f, residual_weight=1.0, boundary_weight=1.0):
    """``(total, residual_term, boundary_term)`` of the combined field."""
    ev = PinnLoss(coeffs, grid, f, residual_weight, boundary_weight)
    bundle = combined_field(bases, c, ev.t, ev.zeta)
    return ev.evaluate(bundle)


def fit_coefficients(bases, coeffs, grid, f, init_c=None, fit_cfg=FitConfig(),
                     residual_weight=1.0, boundary_weight=1.0):
    """Adam descent on the combination coefficients, networks frozen.

    ``bases`` is a list of networks / trained bases or a precomputed
    :class:`BasisTensors` on ``grid``'s collocation points. Returns the
    best coefficients seen.
    """
    ev = PinnLoss(coeffs, grid, f, residual_weight, boundary_weight)
    if isinstance(bases, BasisTensors):
        tensors = bases
    else:
        if len(bases) == 0:
            raise InvalidCoefficientsError("need at least one basis")
        tensors = BasisTensors.from_bases(bases, ev.t, ev.zeta)
    n = tensors.n_bases
    c = np.full(n, 1.0 / n) if init_c is None else np.array(init_c, dtype=float)
    if c.shape != (n,):
        raise InvalidCoefficientsError(f"init_c has {c.size} entries for {n} bases")
    state = AdamState.fresh(n, fit_cfg.learning_rate, fit_cfg.beta_a, fit_cfg.beta_b,
                            fit_cfg.epsilon)
    best = None
    history = []
    for it in range(fit_cfg.max_iters + 1):
        loss, terms, grad = _loss_and_grad(tensors, ev, c)
        if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
            last = best[1] if best is not None else None
            raise DivergenceError(f"coefficient fit diverged at iteration {it}",
                                  last_finite=last, step=it)
        history.append(loss)
        gnorm = float(np.linalg.norm(grad))
        if best is None or loss < best[0]:
            best = (loss, c.copy(), terms, gnorm)
        if loss < fit_cfg.loss_threshold or gnorm < fit_cfg.grad_tol:
            break
        if it == fit_cfg.max_iters:
            break
        c, state = adam_update(c, grad, state)
    loss, c_best, (res, bnd), gnorm = best
    # the certificate refers to the returned (best-seen) coefficients
    converged = bool(gnorm < fit_cfg.grad_tol or loss < fit_cfg.loss_threshold)
    return FitResult(c_best, loss, res, bnd, np.array(history), gnorm, converged)


@dataclass(eq=False)
class ReducedBasisModel:
    """Greedy state and fitted coefficients for every candidate rate.

    ``round_tables[k]`` maps candidate index -> loss for the candidates that
    were still evaluated after ``k + 1`` bases existed. ``selection_history``
    rows are ``(round, chosen rate, worst loss that triggered the choice)``;
    round 0 (the seed basis) has an infinite worst loss.
    """

    problem: object
    candidate_rates: np.ndarray
    bases: list = field(default_factory=list)
    coefficients: dict = field(default_factory=dict)
    losses: dict = field(default_factory=dict)
    round_tables: list = field(default_factory=list)
    selection_history: list = field(default_factory=list)
    fit_cfg: FitConfig = field(default_factory=FitConfig)
    _tensors: BasisTensors | None = None

    @property
    def basis_rates(self):
        return [b.bit_rate for b in self.bases]

    def basis_indices(self):
        return [int(np.argmin(np.abs(self.candidate_rates - r))) for r in self.basis_rates]

    def tensors(self):
        """Basis tensors on the problem grid (computed once per basis set)."""
        if self._tensors is None or self._tensors.n_bases != len(self.bases):
            tt, zz = self.problem.grid.points()
            self._tensors = BasisTensors.from_bases(self.bases, tt, zz)
        return self._tensors

    def padded_coefficients(self, index):
        c = self.coefficients[index]
        out = np.zeros(len(self.bases))
        out[:c.size] = c
        return out

    def worst_losses(self):
        """Worst loss after each round, in round order."""
        return [max(t.values()) if t else 0.0 for t in self.round_tables]

    def loss_table(self):
        """Rows ``(rate, loss, is_basis)`` over all candidates."""
        bidx = set(self.basis_indices())
        return [(float(r), float(self.losses[i]), i in bidx)
                for i, r in enumerate(self.candidate_rates)]

    def write_loss_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rate", "loss", "is_basis"])
            for rate, loss, is_basis in self.loss_table():
                w.writerow([repr(rate), repr(loss), int(is_basis)])


def _fit_round(model, remaining, tensors, f, fit_cfg):
    table = {}
    grid = model.problem.grid
    for i in remaining:
        prev = model.coefficients.get(i)
        if prev is None:
            init = None
        else:
            init = np.zeros(tensors.n_bases)
            init[:prev.size] = prev
        coeffs = model.problem.coefficients(model.candidate_rates[i])
        res = fit_coefficients(tensors, coeffs, grid, f, init, fit_cfg)
        model.coefficients[i] = res.c
        model.losses[i] = res.loss
        table[i] = res.loss
    return table


def greedy_train(problem, candidate_rates, network=NetworkConfig(), train_cfg=TrainConfig(),
                 fit_cfg=FitConfig(), greedy_cfg=GreedyConfig(), on_basis=None):
    """Greedy basis selection over ``candidate_rates``.

    Round 0 trains the seed rate. Every later round fits coefficients for
    all rates that are not yet bases, records the losses, and trains a new
    basis at the worst rate (lowest rate on ties). Stops at
    ``max_bases`` bases, when the worst loss is below ``stop_loss``, or
    when every candidate is a basis.

    ``on_basis(model)`` is called at the end of every round, e.g. to
    checkpoint.
    A basis whose training diverges aborts the loop; the partial model is
    attached to the raised error as ``err.model``.
    """
    rates = np.sort(np.asarray(candidate_rates, dtype=float))
    if rates.size == 0:
        raise InvalidConfigError("candidate_rates is empty")
    model = ReducedBasisModel(problem, rates, fit_cfg=fit_cfg)
    f = problem.boundary()
    grid = problem.grid
    tt, zz = grid.points()
    first = rates[0] if greedy_cfg.first_rate is None else greedy_cfg.first_rate
    chosen = int(np.argmin(np.abs(rates - first)))
    worst = math.inf
    tensors = None
    remaining = list(range(rates.size))
    while True:
        rnd = len(model.bases)
        rate = float(rates[chosen])
        log.info("round %d: training basis at %.4g b/s (worst loss %.3e)", rnd, rate, worst)
        init = init_network(network.layer_sizes, network.seed + rnd)
        try:
            basis = train_basis(init, problem.coefficients(rate), grid, f, train_cfg)
        except DivergenceError as err:
            err.model = model
            raise
        model.bases.append(basis)
        model.selection_history.append((rnd, rate, worst))
        remaining.remove(chosen)
        c = np.zeros(len(model.bases))
        c[-1] = 1.0
        model.coefficients[chosen] = c
        model.losses[chosen] = basis.final_loss
        new = BasisTensors.from_bases([basis], tt, zz)
        tensors = new if tensors is None else tensors.appended(new)
        model._tensors = tensors
        table = _fit_round(model, remaining, tensors, f, fit_cfg)
        model.round_tables.append(table)
        if on_basis is not None:
            on_basis(model)
        if not remaining:
            break
        worst_i = max(remaining, key=lambda i: (table[i], -i))
        worst = table[worst_i]
        if len(model.bases) >= greedy_cfg.max_bases or worst < greedy_cfg.stop_loss:
            break
        chosen = worst_i
    return model


def predict(model, bit_rate, grid=None, refit=False):
    """Combined-field prediction at ``bit_rate`` and its loss.

    Reuses the fitted coefficients of a candidate rate unless ``refit``;
    other rates are fitted starting from the nearest candidate's
    coefficients.
    """
    rates = model.candidate_rates
    lo, hi = rates[0], rates[-1]
    tol = 1e-9 * hi
    if bit_rate < lo - tol or bit_rate > hi + tol:
        raise OutOfRangeError(f"bit rate {bit_rate:.6g} outside [{lo:.6g}, {hi:.6g}]")
    problem = model.problem
    f = problem.boundary()
    coeffs = problem.coefficients(bit_rate)
    nearest = int(np.argmin(np.abs(rates - bit_rate)))
    exact = abs(rates[nearest] - bit_rate) <= tol
    tensors = model.tensors()
    if exact and not refit:
        c = model.padded_coefficients(nearest)
        ev = PinnLoss(coeffs, problem.grid, f)
        loss = ev.evaluate(tensors.combine(c))[0]
    else:
        res = fit_coefficients(tensors, coeffs, problem.grid, f,
                               model.padded_coefficients(nearest), model.fit_cfg)
        c, loss = res.c, res.loss
    grid = problem.grid if grid is None else grid
    if grid == problem.grid:
        value = tensors.combine(c).complex("value")
    else:
        tt, zz = grid.points()
        value = combined_field(model.bases, c, tt, zz).complex("value")
    return GriddedField.from_complex(grid, value), float(loss)


def _candidate_entry(model, i):
    rate = float(model.candidate_rates[i])
    if i not in model.losses:  # not fitted yet
        return dict(rate=rate, loss=None, coefficients=None)
    return dict(rate=rate, loss=float(model.losses[i]),
                coefficients=[float(x) for x in model.padded_coefficients(i)])


def save_model(model, directory, extra=None):
    """Basis checkpoints plus ``manifest.yaml`` in ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    bases = []
    for k, b in enumerate(model.bases):
        name = f"basis_{k:02d}.npz"
        save_checkpoint(d / name, b.params)
        log_name = f"basis_{k:02d}_log.csv"
        b.write_log(d / log_name)
        bases.append(dict(file=name, log=log_name, bit_rate=float(b.bit_rate),
                          final_loss=float(b.final_loss), epochs_run=int(b.epochs_run)))
    manifest = dict(
        format_version=MANIFEST_VERSION,
        candidate_rates=[float(r) for r in model.candidate_rates],
        bases=bases,
        selection_history=[dict(round=int(r), rate=float(x), worst_loss=float(w))
                           for r, x, w in model.selection_history],
        round_worst_losses=[float(w) for w in model.worst_losses()],
        round_tables=[{float(model.candidate_rates[i]): float(v) for i, v in t.items()}
                      for t in model.round_tables],
        candidates=[_candidate_entry(model, i) for i in range(model.candidate_rates.size)],
        fit=dict(vars(model.fit_cfg)),
    )
    if extra:
        manifest.update(extra)
    with open(d / "manifest.yaml", "w") as fh:
        yaml.safe_dump(manifest, fh, sort_keys=False)
    return d / "manifest.yaml"


def load_model(directory, problem):
    """Rebuild a :class:`ReducedBasisModel` saved by :func:`save_model`."""
    d = Path(directory)
    with open(d / "manifest.yaml") as fh:
        m = yaml.safe_load(fh)
    if m.get("format_version") != MANIFEST_VERSION:
        raise InvalidConfigError(f"unsupported manifest version {m.get('format_version')}")
    rates = np.array(m["candidate_rates"], dtype=float)
    model = ReducedBasisModel(problem, rates, fit_cfg=FitConfig(**m.get("fit", {})))
    for entry in m["bases"]:
        params, _ = load_checkpoint(d / entry["file"])
        hist = np.loadtxt(d / entry["log"], delimiter=",", skiprows=1, ndmin=2)
        model.bases.append(TrainedBasis(
            bit_rate=entry["bit_rate"], params=params, final_loss=entry["final_loss"],
            loss_history=hist[:, 1], epochs_run=entry["epochs_run"],
            residual_history=hist[:, 2], boundary_history=hist[:, 3]))
    for i, cand in enumerate(m["candidates"]):
        if cand["loss"] is None:
            continue
        model.coefficients[i] = np.array(cand["coefficients"], dtype=float)
        model.losses[i] = float(cand["loss"])
    model.selection_history = [(s["round"], s["rate"], s["worst_loss"])
                               for s in m["selection_history"]]
    index = {float(r): i for i, r in enumerate(rates)}
    model.round_tables = [{index[float(r)]: float(v) for r, v in t.items()}
                          for t in m["round_tables"]]
    return model
