"""Run configuration: INI ingestion, defaults and validation.

Every section is optional; missing keys fall back to the device defaults
below. Times in the file carry their unit in the key name (``_us``,
``_ns``) and are stored in seconds internally.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

from ..ansatz import DECOMPOSITIONS, DEFAULT_DECOMPOSITION, GateDurations
from ..errors import ConfigError, DomainError
from ..noise import DecoherenceRates, NoiseModel

MODES = ("exact", "shots")
DEFAULT_J_GRID = (0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5)
DEFAULT_ZNE_GRID = (1.0, 1.2, 1.4, 1.6, 1.8, 2.0)
DEFAULT_ZNE_REFERENCE = (0.0, 0.2, 0.4, 0.6, 0.8)

# (spins, j) used when the model section leaves them unset
COMMAND_MODEL_DEFAULTS = {
    "exact": ((2, 3, 4), DEFAULT_J_GRID),
    "sweep": ((2, 3, 4), DEFAULT_J_GRID),
    "vqe": ((4,), (0.5,)),
    "zne-study": ((4,), (0.5,)),
    "rate-check": ((4,), (0.5,)),
}


@dataclass(frozen=True)
class ModelSection:
    """Ring sizes and transverse fields; None picks the command's default."""

    spins: tuple[int, ...] | None = None
    j: tuple[float, ...] | None = None


@dataclass(frozen=True)
class AnsatzSection:
    layers: int | None = None  # defaults to spins - 1
    decomposition: str = DEFAULT_DECOMPOSITION


@dataclass(frozen=True)
class DurationsSection:
    q_rotation_ns: float = 40.0
    s_gate_us: float = 3.0
    decode_us: float = 2.0
    measure_reset_us: float = 0.0
    chi_qs_mhz: float = 0.945

    def build(self) -> GateDurations:
        return GateDurations(
            q_rotation=self.q_rotation_ns * 1e-9,
            s_gate=self.s_gate_us * 1e-6,
            decode=self.decode_us * 1e-6,
            measure_reset=self.measure_reset_us * 1e-6,
            chi_qs=2 * math.pi * self.chi_qs_mhz * 1e6,
        )


@dataclass(frozen=True)
class NoiseSection:
    enabled: bool = True
    t1_q_us: float = 24.0
    t2star_q_us: float = 28.0
    t1_s_us: float = 740.0
    t2star_s_us: float = 510.0
    thermal_q: float = 0.0
    scale: float = 1.0
    scale_phi: float | None = None
    readout_lifetime_ns: float = 68.0  # 1 / Gamma_r

    def rates(self) -> DecoherenceRates:
        return DecoherenceRates(
            T1_q=self.t1_q_us * 1e-6,
            T2star_q=self.t2star_q_us * 1e-6,
            T1_s=self.t1_s_us * 1e-6,
            T2star_s=self.t2star_s_us * 1e-6,
            thermal_q=self.thermal_q,
        )


@dataclass(frozen=True)
class SamplingSection:
    mode: str = "exact"
    shots_total: int = 20000
    z_fraction: float = 0.5


@dataclass(frozen=True)
class SpsaSection:
    iterations: int = 500
    restarts: int = 20
    a: float | None = None  # calibrated when unset
    c0: float = 0.1
    A: float | None = None  # 10% of iterations when unset
    alpha: float = 0.602
    gamma: float = 0.101
    target_step: float = 0.2

    @property
    def stability(self) -> float:
        return self.A if self.A is not None else 0.1 * self.iterations


@dataclass(frozen=True)
class MitigationSection:
    enabled: bool = True
    c_grid: tuple[float, ...] = (1.0, 2.2)


@dataclass(frozen=True)
class ZneSection:
    c_grid: tuple[float, ...] = DEFAULT_ZNE_GRID
    reference_grid: tuple[float, ...] = DEFAULT_ZNE_REFERENCE
    degree: int = 2
    first_order_nodes: tuple[float, float] = (1.0, 2.0)


@dataclass(frozen=True)
class RateCheckSection:
    ratios: tuple[float, ...] = (0.02, 0.05, 0.1)
    cascade_ratio: float = 0.1
    f0g1_fraction: float = 0.25
    target_scale: float = 2.2


@dataclass(frozen=True)
class OutputSection:
    directory: str = "results"
    plots: bool = True


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    workers: int = 1
    model: ModelSection = field(default_factory=ModelSection)
    ansatz: AnsatzSection = field(default_factory=AnsatzSection)
    durations: DurationsSection = field(default_factory=DurationsSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    sampling: SamplingSection = field(default_factory=SamplingSection)
    spsa: SpsaSection = field(default_factory=SpsaSection)
    mitigation: MitigationSection = field(default_factory=MitigationSection)
    zne: ZneSection = field(default_factory=ZneSection)
    rate_check: RateCheckSection = field(default_factory=RateCheckSection)
    output: OutputSection = field(default_factory=OutputSection)

    def for_command(self, command: str | None) -> "RunConfig":
        """Copy with unset model fields filled from the command defaults."""
        spins, j = COMMAND_MODEL_DEFAULTS.get(command, COMMAND_MODEL_DEFAULTS["vqe"])
        model = ModelSection(
            spins=self.model.spins if self.model.spins is not None else spins,
            j=self.model.j if self.model.j is not None else j,
        )
        return replace(self, model=model)

    def layers_for(self, spins: int) -> int:
        return self.ansatz.layers if self.ansatz.layers is not None else spins - 1

    def noise_model(self, c: float | None = None) -> NoiseModel:
        """Noise model at scale ``c`` (configured scale when None); c = 0 is ideal."""
        c = self.noise.scale if c is None else c
        durations = self.durations.build()
        if c == 0 or not self.noise.enabled:
            return NoiseModel.ideal(durations=durations)
        return NoiseModel(self.noise.rates(), scale=c, durations=durations, scale_phi=self.noise.scale_phi)

    def noisy_grid(self) -> tuple[float, ...]:
        """Noise scales the objective is evaluated at."""
        if not self.noise.enabled:
            return (0.0,)
        if self.mitigation.enabled:
            return self.mitigation.c_grid
        return (self.noise.scale,)

    def snapshot(self) -> dict[str, Any]:
        return asdict(self)

    def with_overrides(self, **kw) -> "RunConfig":
        """Replace top-level fields or ``section__key`` entries."""
        top = {}
        sections: dict[str, dict] = {}
        for key, value in kw.items():
            if "__" in key:
                sec, name = key.split("__", 1)
                sections.setdefault(sec, {})[name] = value
            else:
                top[key] = value
        for sec, values in sections.items():
            top[sec] = replace(getattr(self, sec), **values)
        return replace(self, **top)


# --- parsing ------------------------------------------------------------------

_SECTIONS = {
    "model": ModelSection,
    "ansatz": AnsatzSection,
    "durations": DurationsSection,
    "noise": NoiseSection,
    "sampling": SamplingSection,
    "spsa": SpsaSection,
    "mitigation": MitigationSection,
    "zne": ZneSection,
    "rate_check": RateCheckSection,
    "output": OutputSection,
}


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _convert(cls, name: str, raw: str):
    default = getattr(cls(), name)
    annotation = cls.__dataclass_fields__[name].type
    if raw.strip().lower() in ("", "none", "auto") and "None" in str(annotation):
        return None
    if isinstance(default, bool):
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(default, tuple) or "tuple" in str(annotation):
        values = _float_list(raw)
        if name == "spins":
            return tuple(int(v) for v in values)
        return values
    if isinstance(default, int) or "int" in str(annotation):
        return int(raw)
    if isinstance(default, float) or "float" in str(annotation):
        return float(raw)
    return raw.strip()


def load_config(path: str | Path | None = None, **overrides) -> RunConfig:
    """Parse an INI file (or use defaults) and validate."""
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise ConfigError(f"cannot read config file {path}")
        top: dict[str, Any] = {}
        for sec in parser.sections():
            if sec == "run":
                for key, raw in parser.items(sec):
                    if key not in ("seed", "workers"):
                        raise ConfigError(f"unknown key [run] {key}")
                    top[key] = int(raw)
                continue
            if sec not in _SECTIONS:
                raise ConfigError(f"unknown config section [{sec}]")
            cls = _SECTIONS[sec]
            values = {}
            for key, raw in parser.items(sec):
                if key not in cls.__dataclass_fields__:
                    raise ConfigError(f"unknown key [{sec}] {key}")
                try:
                    values[key] = _convert(cls, key, raw)
                except ValueError as exc:
                    raise ConfigError(f"[{sec}] {key}: {exc}") from exc
            top[sec] = replace(getattr(cfg, sec), **values)
        cfg = replace(cfg, **top)
    cfg = cfg.with_overrides(**{k: v for k, v in overrides.items() if v is not None})
    validate(cfg)
    return cfg


def validate(cfg: RunConfig, command: str | None = None) -> None:
    """Raise ConfigError on any invariant violation."""

    def fail(msg):
        raise ConfigError(msg)

    if cfg.seed < 0 or cfg.seed >= 2**64:
        fail("seed must be an unsigned 64-bit integer")
    if cfg.workers < 1:
        fail("workers must be >= 1")
    cfg = cfg.for_command(command)
    if not cfg.model.spins or any(m < 2 for m in cfg.model.spins):
        fail("model.spins entries must be >= 2")
    if not cfg.model.j:
        fail("model.j grid must be non-empty")
    if any(not math.isfinite(j) for j in cfg.model.j):
        fail("model.j entries must be finite")
    if cfg.ansatz.layers is not None:
        for m in cfg.model.spins:
            if cfg.ansatz.layers != m - 1:
                fail(f"ansatz.layers = {cfg.ansatz.layers} but spins = {m} needs {m - 1}")
    if cfg.ansatz.decomposition not in DECOMPOSITIONS:
        fail(f"ansatz.decomposition must be one of {DECOMPOSITIONS}")
    d = cfg.durations
    if min(d.q_rotation_ns, d.s_gate_us, d.decode_us) <= 0 or d.measure_reset_us < 0:
        fail("gate durations must be positive (measure_reset may be 0)")
    if d.chi_qs_mhz <= 0:
        fail("durations.chi_qs_mhz must be positive")
    if cfg.sampling.mode not in MODES:
        fail(f"sampling.mode must be one of {MODES}")
    if cfg.sampling.mode == "shots" and cfg.sampling.shots_total < 2:
        fail("sampling.shots_total must be >= 2 in shots mode")
    if not 0 < cfg.sampling.z_fraction < 1:
        fail("sampling.z_fraction must lie in (0, 1)")
    s = cfg.spsa
    if s.iterations < 1 or s.restarts < 1:
        fail("spsa.iterations and spsa.restarts must be >= 1")
    if s.a is not None and s.a <= 0:
        fail("spsa.a must be positive")
    if s.c0 <= 0 or s.stability < 0:
        fail("spsa.c0 must be positive and spsa.A non-negative")
    if not 0 < s.gamma < s.alpha <= 1:
        fail("spsa needs 0 < gamma < alpha <= 1")
    if s.target_step <= 0:
        fail("spsa.target_step must be positive")
    if cfg.noise.enabled:
        try:
            cfg.noise.rates()
        except DomainError as exc:
            fail(f"noise rates: {exc}")
        if cfg.noise.scale < 0:
            fail("noise.scale must be >= 0")
    grid = cfg.mitigation.c_grid
    if cfg.mitigation.enabled and cfg.noise.enabled:
        if len(grid) < 2:
            fail("mitigation needs a c-grid with at least 2 points")
        if list(grid) != sorted(set(grid)):
            fail("mitigation.c_grid must be strictly ascending")
        if 1.0 not in grid:
            fail("mitigation.c_grid must contain 1.0")
        if grid[0] <= 0:
            fail("mitigation.c_grid entries must be positive")
    z = cfg.zne
    if list(z.c_grid) != sorted(set(z.c_grid)) or z.c_grid[0] <= 0:
        fail("zne.c_grid must be strictly ascending and positive")
    if z.degree < 1:
        fail("zne.degree must be >= 1")
    if len(z.c_grid) < z.degree + 1:
        fail(f"zne.c_grid needs at least {z.degree + 1} points for degree {z.degree}")
    if len(z.first_order_nodes) != 2 or z.first_order_nodes[0] >= z.first_order_nodes[1]:
        fail("zne.first_order_nodes must be two ascending values")
    if any(c < 0 for c in z.reference_grid):
        fail("zne.reference_grid entries must be >= 0")
    r = cfg.rate_check
    if not r.ratios or any(x <= 0 for x in r.ratios):
        fail("rate_check.ratios must be positive")
    if r.cascade_ratio <= 0 or r.f0g1_fraction <= 0 or r.target_scale <= 0:
        fail("rate_check parameters must be positive")
    if command in ("vqe",) and (len(cfg.model.spins) != 1 or len(cfg.model.j) != 1):
        fail("vqe takes a single spins value and a single j value")
