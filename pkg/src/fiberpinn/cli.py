"""Command-line front end.

Every subcommand writes its artifacts plus ``resolved_config.yaml`` into
the output directory. Exit codes: 0 success, 1 usage error, 2 bad
configuration or unusable input/output, 3 numerical divergence.
"""
from __future__ import annotations

import argparse
import csv
import ctypes
import ctypes.util
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from .complexity import comparison_table, mac_parameterized, mac_pinn_per_rate_family, write_table_csv
from .config import RunConfig
from .errors import DivergenceError, FiberPinnError, InvalidConfigError
from .network import init_network, load_checkpoint, save_checkpoint
from .physical_model import build_grid, compute_normalization, ook_initial_condition
from .reduced_basis import greedy_train, load_model, predict, save_model
from .ssfm import nlse_residual_fd, reference_solution
from .trainer import evaluate_on_grid, pinn_loss, train_basis

log = logging.getLogger("fiberpinn")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_DIVERGENCE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _gbps(rate):
    return f"{rate / 1e9:g}Gbps"


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x
                        for x in row])


def cmd_signal(cfg, out, args):
    grid = cfg.build_grid()
    spec = cfg.signal_spec()
    f = ook_initial_condition(spec.pattern, spec.edge_fraction, grid, spec.edge_shape)
    _write_rows(out / "signal.csv", ["t", "f"], zip(grid.t_nodes, f))


def _ssfm_field(cfg, rate, grid):
    fiber = cfg.fiber_params()
    spec = cfg.signal_spec(rate)
    nmap = compute_normalization(fiber, spec, cfg.grid.l_max, cfg.grid.t_max)
    scfg = cfg.ssfm_config(nmap.t_max)
    field, _ = reference_solution(fiber, spec, grid, cfg.grid.l_max, cfg.grid.t_max,
                                  n_time_samples=scfg.n_time_samples,
                                  step_length=scfg.step_length, scheme=scfg.scheme)
    return field


def cmd_ssfm(cfg, out, args):
    """Reference runs, normalized export and finite-difference residual report."""
    grid = cfg.build_grid()
    fine = build_grid(2 * cfg.grid.n_t - 1, 2 * cfg.grid.n_zeta - 1, cfg.grid.n_initial)
    rows = []
    for rate in cfg.ssfm.rates:
        rate = float(rate)
        coeffs = cfg.fiber_problem().coefficients(rate)
        field = _ssfm_field(cfg, rate, grid)
        field.to_csv(out / f"ssfm_{_gbps(rate)}.csv")
        for g, label in ((grid, "base"), (fine, "refined")):
            fld = field if g is grid else _ssfm_field(cfg, rate, g)
            res = nlse_residual_fd(fld, coeffs)
            power = float(np.mean(np.abs(fld.values) ** 2))
            rows.append((rate, label, g.n_t, g.n_zeta, res, power, res / power))
            log.info("%s %s grid: residual %.3e (relative %.3e)", _gbps(rate), label, res,
                     res / power)
    _write_rows(out / "ssfm_residual.csv",
                ["rate", "grid", "n_t", "n_zeta", "residual", "mean_power", "relative"], rows)


def _single_problem(cfg):
    grid = cfg.build_grid()
    if cfg.problem.kind == "toy":
        toy = cfg.toy_problem()
        return grid, toy.coefficients(), toy.boundary(grid), toy
    prob = cfg.fiber_problem()
    return grid, prob.coefficients(cfg.signal.bit_rate), prob.boundary(), None


def cmd_train_basis(cfg, out, args):
    grid, coeffs, f, _ = _single_problem(cfg)
    state = None
    if args.resume:
        init, state = load_checkpoint(args.resume)
        if list(init.layer_sizes) != list(cfg.network.layer_sizes):
            raise InvalidConfigError(
                f"checkpoint layers {init.layer_sizes} differ from config "
                f"{cfg.network.layer_sizes}")
    else:
        init = init_network(tuple(cfg.network.layer_sizes), cfg.seed)
    basis = train_basis(init, coeffs, grid, f, cfg.train_config(), state=state)
    save_checkpoint(out / "basis.npz", basis.params, basis.adam_state)
    basis.write_log(out / "train_log.csv")
    evaluate_on_grid(basis.params, grid).to_csv(out / "field.csv")
    log.info("final loss %.3e after %d epochs", basis.final_loss, basis.epochs_run)
    return basis


def cmd_greedy(cfg, out, args):
    if cfg.problem.kind != "ook":
        raise InvalidConfigError("greedy needs problem.kind = ook")
    model_dir = out / "model"

    def checkpoint(model):
        save_model(model, model_dir)

    try:
        model = greedy_train(cfg.fiber_problem(), cfg.sweep.rates(), cfg.network_config(),
                             cfg.train_config(), cfg.fit_config(), cfg.greedy_config(),
                             on_basis=checkpoint)
    except DivergenceError as err:
        if getattr(err, "model", None) is not None and err.model.bases:
            save_model(err.model, model_dir)
        raise
    checkpoint(model)
    model.write_loss_csv(out / "losses.csv")
    _write_rows(out / "selection_history.csv", ["round", "rate", "worst_loss"],
                [(int(r), float(x), float(w)) for r, x, w in model.selection_history])
    return model


def _model_dir(cfg, out, args):
    return Path(args.model) if args.model else out / "model"


def cmd_predict(cfg, out, args):
    model = load_model(_model_dir(cfg, out, args), cfg.fiber_problem())
    bidx = set(model.basis_indices())
    rows = []
    for i, rate in enumerate(model.candidate_rates):
        _, loss = predict(model, float(rate), refit=args.refit)
        rows.append((float(rate), float(loss), int(i in bidx)))
    _write_rows(out / "predict.csv", ["rate", "loss", "is_basis"], rows)


def cmd_complexity(cfg, out, args):
    p = cfg.complexity_params()
    rows = comparison_table(p, cfg.complexity.distances)
    write_table_csv(rows, out / "complexity.csv")
    c_f, c_pf = mac_pinn_per_rate_family(p), mac_parameterized(p)
    summary = dict(c_f=int(c_f), c_pf=int(c_pf), ratio=float(c_pf / c_f),
                   n_dispersion=float(p.dispersion_macs), n_nonlinear=float(p.nonlinear_macs))
    with open(out / "complexity_summary.yaml", "w") as fh:
        yaml.safe_dump(summary, fh, sort_keys=False)


def cmd_validate(cfg, out, args):
    if cfg.problem.kind == "toy":
        grid, coeffs, f, toy = _single_problem(cfg)
        if args.model:
            params, _ = load_checkpoint(args.model)
            loss = pinn_loss(params, coeffs, grid, f)[0]
        else:
            basis = cmd_train_basis(cfg, out, argparse.Namespace(resume=None))
            params, loss = basis.params, basis.final_loss
        l2 = evaluate_on_grid(params, grid).relative_l2(toy.exact_field(grid))
        rows = [("toy", float("nan"), float(loss), l2)]
    else:
        model = load_model(_model_dir(cfg, out, args), cfg.fiber_problem())
        rows = []
        for rate in cfg.validate.rates:
            field, loss = predict(model, float(rate))
            ref = _ssfm_field(cfg, float(rate), model.problem.grid)
            rows.append(("ook", float(rate), float(loss), field.relative_l2(ref)))
    for kind, rate, loss, l2 in rows:
        log.info("validate %s rate %s: loss %.3e, relative L2 %.3e", kind, rate, loss, l2)
    _write_rows(out / "validate.csv", ["problem", "rate", "loss", "relative_l2"], rows)


COMMANDS = {
    "signal": cmd_signal,
    "ssfm": cmd_ssfm,
    "train-basis": cmd_train_basis,
    "greedy": cmd_greedy,
    "predict": cmd_predict,
    "complexity": cmd_complexity,
    "validate": cmd_validate,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--out", help="output directory (overrides config 'out')")
    common.add_argument("--seed", type=int, help="run seed (overrides config 'seed')")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted-key override, repeatable, applied last")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = _Parser(prog="fiberpinn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("signal", parents=[common], help="write the launch waveform f(t)")
    sub.add_parser("ssfm", parents=[common], help="SSFM reference runs and residual report")
    p = sub.add_parser("train-basis", parents=[common], help="train one PINN")
    p.add_argument("--resume", help="checkpoint to continue from")
    sub.add_parser("greedy", parents=[common], help="greedy reduced-basis training")
    p = sub.add_parser("predict", parents=[common], help="loss of every candidate rate")
    p.add_argument("--model", help="model directory (default: <out>/model)")
    p.add_argument("--refit", action="store_true", help="refit instead of cached coefficients")
    sub.add_parser("complexity", parents=[common], help="MAC comparison table")
    p = sub.add_parser("validate", parents=[common], help="L2 error against a reference")
    p.add_argument("--model", help="model directory, or checkpoint for the toy problem")
    return parser


def resolve_config(args):
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_overrides([f"seed={args.seed}"])
    if args.out is not None:
        cfg.out = args.out
    return cfg.with_overrides(args.set).validate_plan()


def _keep_freed_memory():
    """Stop glibc from returning each multi-megabyte temporary to the kernel.

    Training frees and reallocates the same few arrays every epoch; with the
    default thresholds every one is a fresh mmap, and page faults then take
    about half the run time. No-op off glibc.
    """
    if not sys.platform.startswith("linux"):
        return
    try:
        libc = ctypes.CDLL(ctypes.util.find_library("c") or "libc.so.6")
        m_trim_threshold, m_mmap_threshold = -1, -3
        libc.mallopt(m_mmap_threshold, 1 << 30)
        libc.mallopt(m_trim_threshold, 1 << 30)
    except (OSError, AttributeError):
        pass


def main(argv=None):
    _keep_freed_memory()
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        cfg.dump(out / "resolved_config.yaml")
        COMMANDS[args.command](cfg, out, args)
    except DivergenceError as err:
        print(f"fiberpinn: numerical divergence: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (FiberPinnError, OSError) as err:
        print(f"fiberpinn: {err}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
