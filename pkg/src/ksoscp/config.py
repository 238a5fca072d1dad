"""Run configuration: defaults, flat ``section.key = value`` files and overrides.

Precedence is command-line flag, then config file, then the defaults below.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .exceptions import ConfigError

__all__ = [
    "RunConfig",
    "HyperConfig",
    "SolverSection",
    "TuningConfig",
    "MetricsConfig",
    "BenchConfig",
    "parse_config_text",
    "load_config",
    "apply_overrides",
    "resolve_config",
    "parse_int_list",
    "parse_float_list",
]


@dataclass
class HyperConfig:
    a: float = 0.0
    b: float = 10.0
    lambda1: float = 1.0
    lambda2: float = 1.0


@dataclass
class SolverSection:
    learning_rate: float = 0.01
    momentum: float = 0.9
    max_iter: int = 10_000
    tol: float = 1e-4
    check_every: int = 50
    strict: bool = False


@dataclass
class TuningConfig:
    enabled: bool = True
    theta_f: str = ""           # comma list; when set, tuning is skipped
    folds: int = 0              # 0 picks 10 for n >= 100, else 5
    budget: int = 30
    theta_lo: str = ""          # comma list; empty uses 0.05 x input range
    theta_hi: str = ""          # comma list; empty uses 1 x input range
    tol: float = 1e-2
    max_iter: int = 10_000
    n_boot: int = 200


@dataclass
class MetricsConfig:
    alpha: float = 0.1
    n_X: int = 100
    n_Y: int = 1000
    mi_k: int = 3
    sqi_bins: int = 50
    n_test: int = 1000


@dataclass
class BenchConfig:
    seeds: str = "0"
    cases: str = "1"
    methods: str = "ksos,gp"
    jobs: int = 0               # 0 falls back to KSOS_JOBS, then 1


@dataclass
class RunConfig:
    case_id: int = 1
    n: int = 100
    m: int = 200
    d: int = 1
    seed: int = 0
    output: str = "out"
    hyper: HyperConfig = field(default_factory=HyperConfig)
    solver: SolverSection = field(default_factory=SolverSection)
    tuning: TuningConfig = field(default_factory=TuningConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return apply_overrides(cls(), _flatten(d))

    def keys(self):
        return sorted(_flatten(self.to_dict()))


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(value, kind, key):
    if not isinstance(value, str):
        if kind is bool:
            return bool(value)
        return kind(value)
    text = value.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {value!r} as {kind.__name__}") from exc


def _field_type(obj, name):
    for f in dataclasses.fields(obj):
        if f.name == name:
            return {"int": int, "float": float, "bool": bool, "str": str}.get(
                f.type if isinstance(f.type, str) else f.type.__name__, str)
    return None


def apply_overrides(cfg, overrides):
    """Return a copy of ``cfg`` with dotted ``key -> value`` pairs applied."""
    cfg = _deep_copy(cfg)
    for key, value in overrides.items():
        parts = key.split(".")
        target = cfg
        for p in parts[:-1]:
            if not hasattr(target, p) or not dataclasses.is_dataclass(getattr(target, p)):
                raise ConfigError(f"unknown config section in {key!r}")
            target = getattr(target, p)
        kind = _field_type(target, parts[-1])
        if kind is None or dataclasses.is_dataclass(getattr(target, parts[-1])):
            raise ConfigError(f"unknown config key {key!r}")
        setattr(target, parts[-1], _coerce(value, kind, key))
    return cfg


def _deep_copy(cfg):
    return dataclasses.replace(cfg, **{
        f.name: dataclasses.replace(getattr(cfg, f.name))
        for f in dataclasses.fields(cfg) if dataclasses.is_dataclass(getattr(cfg, f.name))})


def parse_config_text(text):
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return apply_overrides(RunConfig(), parse_config_text(text))


def resolve_config(path=None, cli_overrides=None):
    """Defaults, then the file at ``path``, then ``cli_overrides``."""
    cfg = load_config(path) if path else RunConfig()
    return apply_overrides(cfg, {k: v for k, v in (cli_overrides or {}).items()
                                 if v is not None})


def parse_int_list(text):
    """``"0-3,7"`` -> ``[0, 1, 2, 3, 7]``."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def parse_float_list(text):
    return [float(p) for p in str(text).split(",") if p.strip()]
