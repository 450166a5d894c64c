"""Run configuration (JSON) with the numerical-example defaults."""

import json
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional, Union

import numpy as np

from .errors import ConfigError
from .plant import Plant


@dataclass
class PlantConfig:
    A: List[List[float]] = field(default_factory=lambda: [[0.0, 1.0], [-2.0, 3.0]])
    B: List[List[float]] = field(default_factory=lambda: [[0.0], [1.0]])
    K: List[List[float]] = field(default_factory=lambda: [[1.0, -4.0]])
    alpha: float = 0.05


@dataclass
class AbstractionConfig:
    sigma_bar: float = 1.0
    l: int = 100
    N_conv: int = 5
    m_bar: int = 10
    nu_grid: int = 16
    nu_safety: float = 1.5
    flowpipe_step: float = 0.01
    eps_max_doubling_cap: int = 60
    initial: Union[str, List[int]] = "all"


@dataclass
class SimulationConfig:
    horizon: float = 5.0
    trace_count: int = 100
    seed: int = 0
    scan_dt: Optional[float] = None


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: List[str] = field(default_factory=lambda: ["json", "csv", "xml"])
    xml_scale: int = 10_000


@dataclass
class RunConfig:
    plant: PlantConfig = field(default_factory=PlantConfig)
    abstraction: AbstractionConfig = field(default_factory=AbstractionConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def make_plant(self) -> Plant:
        pc = self.plant
        try:
            return Plant(np.array(pc.A, dtype=float), np.array(pc.B, dtype=float),
                         np.array(pc.K, dtype=float), pc.alpha)
        except ValueError as exc:
            raise ConfigError("plant", str(exc)) from exc


_SECTIONS = {"plant": PlantConfig, "abstraction": AbstractionConfig,
             "simulation": SimulationConfig, "output": OutputConfig}
_FORMATS = {"json", "csv", "xml"}


def _matrix(name, value):
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(name, "must be a rectangular array of numbers")
    if M.ndim != 2 or not np.all(np.isfinite(M)):
        raise ConfigError(name, "must be a finite 2-D array")
    return M.tolist()


def _number(name, value, kind=float, positive=True, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if kind is int and value != int(value):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    value = kind(value)
    if minimum is not None and value < minimum:
        raise ConfigError(name, f"must be >= {minimum}")
    if positive and minimum is None and not value > 0:
        raise ConfigError(name, "must be positive")
    return value


def parse_config(data: dict) -> RunConfig:
    """Validate a config mapping; errors name the offending field."""
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be an object")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown section")
    parts = {}
    for name, cls in _SECTIONS.items():
        raw = data.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError(name, "must be an object")
        allowed = {f.name for f in fields(cls)}
        extra = set(raw) - allowed
        if extra:
            raise ConfigError(f"{name}.{sorted(extra)[0]}", "unknown field")
        parts[name] = cls(**raw)
    cfg = RunConfig(**parts)

    pc = cfg.plant
    pc.A = _matrix("plant.A", pc.A)
    pc.B = _matrix("plant.B", pc.B)
    pc.K = _matrix("plant.K", pc.K)
    pc.alpha = _number("plant.alpha", pc.alpha)
    if not pc.alpha < 1.0:
        raise ConfigError("plant.alpha", "must lie in (0, 1)")
    cfg.make_plant()

    ac = cfg.abstraction
    ac.sigma_bar = _number("abstraction.sigma_bar", ac.sigma_bar)
    for name in ("l", "N_conv", "m_bar", "eps_max_doubling_cap"):
        setattr(ac, name, _number(f"abstraction.{name}", getattr(ac, name), int, minimum=1))
    ac.nu_grid = _number("abstraction.nu_grid", ac.nu_grid, int, minimum=2)
    ac.nu_safety = _number("abstraction.nu_safety", ac.nu_safety, minimum=1.0)
    ac.flowpipe_step = _number("abstraction.flowpipe_step", ac.flowpipe_step)
    if ac.initial != "all":
        if not isinstance(ac.initial, list) or not all(
                isinstance(s, int) and not isinstance(s, bool) for s in ac.initial):
            raise ConfigError("abstraction.initial", 'must be "all" or a list of region indices')

    sc = cfg.simulation
    sc.horizon = _number("simulation.horizon", sc.horizon)
    sc.trace_count = _number("simulation.trace_count", sc.trace_count, int, minimum=1)
    sc.seed = _number("simulation.seed", sc.seed, int, minimum=0)
    if sc.scan_dt is not None:
        sc.scan_dt = _number("simulation.scan_dt", sc.scan_dt)

    oc = cfg.output
    if not isinstance(oc.directory, str) or not oc.directory:
        raise ConfigError("output.directory", "must be a non-empty string")
    if not isinstance(oc.formats, list) or not set(oc.formats) <= _FORMATS:
        raise ConfigError("output.formats", f"must be a subset of {sorted(_FORMATS)}")
    oc.formats = sorted(set(oc.formats))
    oc.xml_scale = _number("output.xml_scale", oc.xml_scale, int, minimum=1)
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}")
    return parse_config(data)
