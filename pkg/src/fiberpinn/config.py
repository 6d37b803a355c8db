"""Run configuration: a tree of plain dataclasses with YAML round-tripping.

Precedence, lowest to highest: dataclass defaults, the ``--config`` file,
``--seed``, then ``--set section.key=value`` overrides in command-line
order. Override values are parsed as YAML scalars or lists, so
``--set train.max_epochs=500`` gives an int and
``--set network.layer_sizes=[2,16,2]`` a list.
"""
from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import physical_model as pm
from .complexity import ComplexityParams
from .errors import FiberPinnError, InvalidConfigError
from .network import FULL_SCALE_LAYERS
from .reduced_basis import FiberProblem, FitConfig, GreedyConfig, NetworkConfig
from .ssfm import SsfmConfig
from .toy import DispersionToy
from .trainer import TrainConfig


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``2e9`` style numbers as floats."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                |[-+]?\.(?:inf|Inf|INF)
                |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def _yaml_load(stream):
    return yaml.load(stream, Loader=_Loader)


@dataclass
class FiberSection:
    alpha: float = pm.TABLE_ALPHA
    beta2: float = pm.TABLE_BETA2
    beta3: float = pm.TABLE_BETA3
    n2: float = pm.TABLE_N2
    a_eff: float = pm.TABLE_A_EFF
    lambda_c: float = pm.TABLE_LAMBDA


@dataclass
class SignalSection:
    bit_rate: float = 10e9  # single-rate commands
    peak_power: float = pm.DEFAULT_PEAK_POWER
    pattern: list | None = None  # None: seeded pseudo-random pattern
    pattern_bits: int = pm.DEFAULT_PATTERN_BITS
    pattern_seed: int = pm.DEFAULT_PATTERN_SEED
    edge_fraction: float = pm.DEFAULT_EDGE_FRACTION
    edge_shape: str = pm.DEFAULT_EDGE_SHAPE


@dataclass
class GridSection:
    n_t: int = 312
    n_zeta: int = 11
    n_initial: int = 100
    l_max: float = pm.DEFAULT_L_MAX
    t_max: float | None = None  # None: the pattern fills [-1, 1] at every rate


@dataclass
class ProblemSection:
    kind: str = "ook"  # "ook" or "toy"
    toy_width: float = 0.2
    toy_dispersion: float = 0.02


@dataclass
class NetworkSection:
    layer_sizes: list = field(default_factory=lambda: list(FULL_SCALE_LAYERS))


@dataclass
class TrainSection:
    max_epochs: int = 40000
    loss_threshold: float = 1e-4
    learning_rate: float = 1e-3
    residual_weight: float = 1.0
    boundary_weight: float = 1.0
    batch_size: int | None = None
    log_every: int = 1000


@dataclass
class FitSection:
    max_iters: int = 2000
    learning_rate: float = 1e-2
    loss_threshold: float = 0.0
    grad_tol: float = 1e-9


@dataclass
class GreedySection:
    max_bases: int = 12
    stop_loss: float = 1e-4
    first_rate: float | None = None


@dataclass
class SweepSection:
    min_rate: float = 2e9
    max_rate: float = 50e9
    count: int = 91

    def rates(self):
        return np.linspace(self.min_rate, self.max_rate, self.count)


@dataclass
class SsfmSection:
    rates: list = field(default_factory=lambda: [2e9, 10e9, 50e9])
    n_time_samples: int = 2048
    steps_per_zeta_interval: int = 100
    scheme: str = "symmetric"


@dataclass
class ComplexitySection:
    n_rates: int = 91
    m_t: int = 1024
    m_zeta: int = 11
    l_unit: float = 1e3
    hidden_layers: int = 5
    neurons: int = 100
    n_bases: int = 12
    n_dispersion: float | None = None
    n_nonlinear: float | None = None
    distances: list = field(default_factory=lambda: [1e4 * k for k in range(1, 11)])


@dataclass
class ValidateSection:
    rates: list = field(default_factory=lambda: [2e9, 6e9, 10e9])


@dataclass
class RunConfig:
    seed: int = 0
    out: str = "runs/default"
    fiber: FiberSection = field(default_factory=FiberSection)
    signal: SignalSection = field(default_factory=SignalSection)
    grid: GridSection = field(default_factory=GridSection)
    problem: ProblemSection = field(default_factory=ProblemSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    train: TrainSection = field(default_factory=TrainSection)
    fit: FitSection = field(default_factory=FitSection)
    greedy: GreedySection = field(default_factory=GreedySection)
    sweep: SweepSection = field(default_factory=SweepSection)
    ssfm: SsfmSection = field(default_factory=SsfmSection)
    complexity: ComplexitySection = field(default_factory=ComplexitySection)
    validate: ValidateSection = field(default_factory=ValidateSection)

    # ---- serialization -------------------------------------------------
    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        return _build(cls, data or {}, "")

    def dump(self, path):
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = _yaml_load(fh)
        except OSError as err:
            raise InvalidConfigError(f"cannot read config {path}: {err}") from err
        except yaml.YAMLError as err:
            raise InvalidConfigError(f"malformed config {path}: {err}") from err
        if data is not None and not isinstance(data, dict):
            raise InvalidConfigError(f"config {path} must be a mapping")
        return cls.from_dict(data)

    def with_overrides(self, overrides):
        data = self.to_dict()
        for item in overrides:
            key, sep, raw = item.partition("=")
            if not sep or not key:
                raise InvalidConfigError(f"override {item!r} is not key=value")
            try:
                value = _yaml_load(raw)
            except yaml.YAMLError as err:
                raise InvalidConfigError(f"bad override value in {item!r}") from err
            node = data
            parts = key.split(".")
            for p in parts[:-1]:
                if not isinstance(node.get(p), dict):
                    raise InvalidConfigError(f"unknown config section in {key!r}")
                node = node[p]
            if parts[-1] not in node:
                raise InvalidConfigError(f"unknown config key {key!r}")
            node[parts[-1]] = value
        return RunConfig.from_dict(data)

    # ---- run plan ------------------------------------------------------
    def fiber_params(self):
        return pm.derive_fiber_params(**dataclasses.asdict(self.fiber))

    def pattern(self):
        s = self.signal
        if s.pattern is None:
            return pm.default_pattern(s.pattern_bits, s.pattern_seed)
        return tuple(int(b) for b in s.pattern)

    def signal_spec(self, bit_rate=None):
        s = self.signal
        return pm.SignalSpec(bit_rate=s.bit_rate if bit_rate is None else bit_rate,
                             peak_power=s.peak_power, pattern=self.pattern(),
                             edge_fraction=s.edge_fraction, edge_shape=s.edge_shape)

    def build_grid(self):
        g = self.grid
        return pm.build_grid(g.n_t, g.n_zeta, g.n_initial)

    def fiber_problem(self):
        return FiberProblem(self.fiber_params(), self.signal_spec(), self.build_grid(),
                            l_max=self.grid.l_max, t_max=self.grid.t_max)

    def toy_problem(self):
        return DispersionToy(self.problem.toy_width, self.problem.toy_dispersion)

    def network_config(self):
        return NetworkConfig(tuple(self.network.layer_sizes), self.seed)

    def train_config(self):
        return TrainConfig(batch_seed=self.seed, **dataclasses.asdict(self.train))

    def fit_config(self):
        return FitConfig(**dataclasses.asdict(self.fit))

    def greedy_config(self):
        return GreedyConfig(**dataclasses.asdict(self.greedy))

    def ssfm_step_length(self):
        g = self.grid
        return g.l_max / ((g.n_zeta - 1) * self.ssfm.steps_per_zeta_interval)

    def ssfm_config(self, t_max):
        return SsfmConfig(step_length=self.ssfm_step_length(),
                          n_time_samples=self.ssfm.n_time_samples,
                          window=2.0 * t_max, scheme=self.ssfm.scheme)

    def complexity_params(self):
        c = dataclasses.asdict(self.complexity)
        c.pop("distances")
        return ComplexityParams(l_max=self.grid.l_max, **c)

    def validate_plan(self):
        """Build every derived object once so bad values fail early."""
        try:
            if self.problem.kind not in ("ook", "toy"):
                raise InvalidConfigError(f"unknown problem kind {self.problem.kind!r}")
            self.fiber_problem()
            self.toy_problem()
            self.train_config()
            self.fit_config()
            self.greedy_config()
            self.complexity_params()
            if self.sweep.count < 1 or self.sweep.min_rate > self.sweep.max_rate:
                raise InvalidConfigError("sweep needs count >= 1 and min_rate <= max_rate")
            if self.ssfm.steps_per_zeta_interval < 1:
                raise InvalidConfigError("ssfm.steps_per_zeta_interval must be >= 1")
        except InvalidConfigError:
            raise
        except (FiberPinnError, TypeError) as err:
            raise InvalidConfigError(str(err)) from err
        return self


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise InvalidConfigError(f"section {prefix or '<root>'} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise InvalidConfigError(
            f"unknown key(s) {sorted(unknown)} in section {prefix or '<root>'}")
    kwargs = {}
    for name, value in data.items():
        default = fields[name].default_factory() if fields[name].default_factory \
            is not dataclasses.MISSING else None
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{prefix}{name}.")
        else:
            kwargs[name] = value
    return cls(**kwargs)
