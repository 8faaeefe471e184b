"""Experiment configuration and its flat ``key = value`` text format."""

import dataclasses
from dataclasses import dataclass, fields
from fractions import Fraction

import numpy as np

from .hamiltonians import Model, Protocol
from .quantum_kernel import MAX_DIM, SpinSpecies

MIN_CLUSTERS = 100
MEMORY_LIMIT_BYTES = 2 * 1024**3
ELECTRON_GAMMA = 1.76085963023e11


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class ExperimentConfig:
    s: float = 0.5
    gamma: float = ELECTRON_GAMMA
    rho: float = 1e24
    M: int = 2
    Q: int = 40000
    protocol: str = "dc"
    model: str = "secular"
    omega_ratio: float = 100.0
    b_rf: float = 1e-3
    rf_step: float = 1e-3
    rf_linearity_check: bool = False
    fd_rel_step: float = 1e-3
    tau_min: float = 0.02
    tau_max: float = 3.0
    tau_points: int = 60
    seed: int = 12345
    steps_per_period: int = 64
    max_step: float = 0.025
    readout: str = "plane"
    covariance: str = "joint"
    n_blocks: int = 20
    chunk_size: int = 512
    min_distance: float = 0.0
    threads: int = 1

    def __post_init__(self):
        try:
            species = SpinSpecies(self.s, self.gamma)
        except ValueError as exc:
            raise ConfigError(f"s: {exc}") from None
        object.__setattr__(self, "s", species.s)
        checks = [
            ("protocol", self.protocol in {p.value for p in Protocol}, "must be dc or rf"),
            ("model", self.model in {m.value for m in Model}, "must be secular or full"),
            ("M", self.M >= 1, "must be >= 1"),
            ("M", species.dim**self.M <= MAX_DIM,
             f"(2s+1)^M = {species.dim ** self.M} exceeds {MAX_DIM}"),
            ("Q", self.Q >= MIN_CLUSTERS, f"must be >= {MIN_CLUSTERS}"),
            ("rho", self.rho > 0, "must be positive"),
            ("gamma", self.gamma != 0, "must be nonzero"),
            ("tau_min", self.tau_min > 0, "must be positive"),
            ("tau_max", self.tau_max > self.tau_min, "must exceed tau_min"),
            ("tau_points", self.tau_points >= 3, "must be >= 3"),
            ("omega_ratio", self.model != "full" or self.omega_ratio > 0,
             "must be positive for the full model"),
            ("model", not (self.protocol == "rf" and self.model == "full"),
             "the rf protocol uses the secular model"),
            ("b_rf", self.b_rf >= 0, "must be non-negative"),
            ("rf_step", self.rf_step > 0, "must be positive"),
            ("fd_rel_step", 0 < self.fd_rel_step < 0.5, "must be in (0, 0.5)"),
            ("steps_per_period", self.steps_per_period >= 4, "must be >= 4"),
            ("max_step", self.max_step >= 0, "must be >= 0 (0 disables the cap)"),
            ("readout", self.readout in ("plane", "full"), "must be plane or full"),
            ("covariance", self.covariance in ("joint", "quantum"), "must be joint or quantum"),
            ("n_blocks", 2 <= self.n_blocks <= self.Q, "must be in [2, Q]"),
            ("chunk_size", self.chunk_size >= 1, "must be >= 1"),
            ("min_distance", self.min_distance >= 0, "must be >= 0"),
            ("threads", self.threads >= 1, "must be >= 1"),
            ("seed", 0 <= self.seed < 2**64, "must be an unsigned 64-bit integer"),
        ]
        for key, ok, msg in checks:
            if not ok:
                raise ConfigError(f"{key}: {msg}")

    @property
    def species(self) -> SpinSpecies:
        return SpinSpecies(self.s, self.gamma)

    @property
    def dim(self) -> int:
        return self.species.dim**self.M

    @property
    def taus(self):
        return np.geomspace(self.tau_min, self.tau_max, self.tau_points)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    def bytes_per_cluster(self):
        """Peak working memory attributable to one cluster in a chunk."""
        dim = self.dim
        states = self.tau_points * dim * 16 * 3
        matrices = dim * dim * 16 * (6 if self.model == "full" else 3)
        if self.model == "full":
            matrices += self.tau_points * dim * dim * 16
        return states + matrices

    def effective_chunk(self):
        per = self.bytes_per_cluster()
        budget = MEMORY_LIMIT_BYTES // self.threads
        if per > budget:
            raise ConfigError(
                f"M: one cluster needs {per / 1e9:.2f} GB, over the "
                f"{budget / 1e9:.2f} GB per-thread budget"
            )
        return max(1, min(self.chunk_size, budget // per))


def coerce_value(name, kind, text):
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            try:
                return int(text)
            except ValueError:
                value = float(text)  # accepts 4e4
                if value != int(value):
                    raise
                return int(value)
        if kind is float:
            return float(Fraction(text)) if "/" in text else float(text)
        return text.strip("\"'").lower() if name in ("protocol", "model", "readout",
                                                     "covariance") else text
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{name}: cannot parse {text!r} as {kind.__name__}") from None


FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def parse_assignments(lines, source="<config>"):
    """Parse ``key = value`` lines into a dict of typed values."""
    values = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in FIELD_TYPES:
            raise ConfigError(f"{key}: unknown configuration key ({source}:{lineno})")
        values[key] = coerce_value(key, FIELD_TYPES[key], value)
    return values


def load_config(path=None, overrides=None, base=None) -> ExperimentConfig:
    """Read a config file (optional) and apply ``overrides`` on top."""
    values = dict(base.to_dict()) if base is not None else {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                values.update(parse_assignments(fh, source=str(path)))
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    for key, value in (overrides or {}).items():
        if key not in FIELD_TYPES:
            raise ConfigError(f"{key}: unknown configuration key")
        if isinstance(value, str):
            value = coerce_value(key, FIELD_TYPES[key], value)
        values[key] = value
    return ExperimentConfig(**values)


def format_config(config: ExperimentConfig) -> str:
    lines = [f"{k} = {v}" for k, v in config.to_dict().items()]
    return "\n".join(lines) + "\n"
