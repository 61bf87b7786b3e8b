"""Physical constants, device/numerics configuration and the config-file grammar.

Units are fixed throughout the package: energies in meV, lengths in nm,
wavevectors in 1/nm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Any, Mapping

HBAR2_OVER_2ME = 38.1  # meV nm^2
COULOMB_CONST = 1439.96  # e^2 / (4 pi eps0), meV nm
KB_MEV_PER_K = 0.08617


class ConfigError(ValueError):
    """Raised when one or more configuration values are invalid.

    ``errors`` holds one message per violated constraint, each starting with
    the offending ``section.key``.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class DeviceConfig:
    lambda_nm: float = 100.0
    v0_mev: float = 0.56
    depth_nm: float = 30.0
    mass_ratio: float = 0.067
    epsilon_r: float = 13.0

    @property
    def kinetic_prefactor(self) -> float:
        """hbar^2 / (2 m*) in meV nm^2."""
        return HBAR2_OVER_2ME / self.mass_ratio


@dataclass(frozen=True)
class NumericsConfig:
    plane_wave_cutoff: int = 16
    k_grid: int = 256
    real_grid: int = 64
    real_span: int = 21
    q_grid: int = 128
    q_angular: int = 96
    q_max_nm_inv: float = 20 * 2 * math.pi / 100.0
    orbital_cutoff: int = 4
    eigensolver_tol: float = 1e-9
    ed_max_iterations: int = 5000
    ed_max_dim: int = 100_000


@dataclass(frozen=True)
class TaskConfig:
    nb: tuple = (0,)
    n_max: int = 8
    temperature_k: float = 0.01
    sweep_v0: tuple = ()
    sweep_nb: tuple = (0,)
    sweep_depth: tuple = ()


@dataclass(frozen=True)
class Scales:
    e_lambda: float
    coulomb_scale: float

    @staticmethod
    def thermal_energy(temperature_k: float) -> float:
        return KB_MEV_PER_K * temperature_k


def derive_scales(cfg: DeviceConfig) -> Scales:
    e_lambda = cfg.kinetic_prefactor / cfg.lambda_nm**2
    coulomb = COULOMB_CONST / (cfg.epsilon_r * cfg.lambda_nm)
    return Scales(e_lambda=e_lambda, coulomb_scale=coulomb)


def _device_errors(cfg: DeviceConfig) -> list[str]:
    errors = []
    if not cfg.lambda_nm > 0:
        errors.append(f"device.lambda_nm must be > 0 (got {cfg.lambda_nm})")
    if not cfg.depth_nm > 0:
        errors.append(f"device.depth_nm must be > 0 (got {cfg.depth_nm})")
    if not cfg.mass_ratio > 0:
        errors.append(f"device.mass_ratio must be > 0 (got {cfg.mass_ratio})")
    if not cfg.epsilon_r >= 1:
        errors.append(f"device.epsilon_r must be >= 1 (got {cfg.epsilon_r})")
    if not cfg.v0_mev >= 0:
        errors.append(f"device.v0_mev must be >= 0 (got {cfg.v0_mev})")
    return errors


def _numerics_errors(num: NumericsConfig) -> list[str]:
    errors = []
    for f in fields(num):
        value = getattr(num, f.name)
        if not value > 0:
            errors.append(f"numerics.{f.name} must be > 0 (got {value})")
    if num.k_grid % 2:
        errors.append(f"numerics.k_grid must be even (got {num.k_grid})")
    if num.q_angular % 8:
        errors.append(f"numerics.q_angular must be a multiple of 8 (got {num.q_angular})")
    if num.plane_wave_cutoff <= 4:
        errors.append("numerics.plane_wave_cutoff must exceed 4 for the cutoff drift check")
    elif 2 * (num.plane_wave_cutoff - 4) + 1 < num.orbital_cutoff + 2:
        errors.append(f"numerics.plane_wave_cutoff = {num.plane_wave_cutoff} is too small for "
                      f"orbital_cutoff = {num.orbital_cutoff}")
    return errors


def _coerce(cls, value):
    if value is None:
        return cls()
    if isinstance(value, cls):
        return value
    if isinstance(value, Mapping):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(value) - known)
        if unknown:
            section = "device" if cls is DeviceConfig else "numerics"
            raise ConfigError([f"{section}.{k}: unknown key" for k in unknown])
        return cls(**value)
    raise TypeError(f"cannot build {cls.__name__} from {type(value).__name__}")


def validate_config(cfg=None, num=None) -> tuple[DeviceConfig, NumericsConfig]:
    """Fill defaults and check invariants.

    ``cfg``/``num`` may be dataclass instances, plain mappings or ``None``.
    Raises :class:`ConfigError` listing every violated field.
    """
    cfg = _coerce(DeviceConfig, cfg)
    num = _coerce(NumericsConfig, num)
    errors = _device_errors(cfg) + _numerics_errors(num)
    if errors:
        raise ConfigError(errors)
    return cfg, num


# -- config file grammar -------------------------------------------------------

_SECTIONS = {"device": DeviceConfig, "numerics": NumericsConfig, "task": TaskConfig}
_LIST_KEYS = {"nb", "sweep_v0", "sweep_nb", "sweep_depth"}


def parse_config_text(text: str) -> dict[str, dict[str, str]]:
    """Parse ``section.key = value`` lines into raw strings per section.

    ``#`` starts a comment. Unknown sections or keys are errors.
    """
    raw: dict[str, dict[str, str]] = {name: {} for name in _SECTIONS}
    errors = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'section.key = value'")
            continue
        lhs, rhs = (s.strip() for s in line.split("=", 1))
        try:
            _check_key(lhs)
        except ConfigError as exc:
            errors.extend(f"line {lineno}: {e}" for e in exc.errors)
            continue
        section, key = lhs.split(".", 1)
        raw[section][key] = rhs
    if errors:
        raise ConfigError(errors)
    return raw


def _check_key(dotted: str) -> None:
    if "." not in dotted:
        raise ConfigError([f"{dotted}: key must have the form section.key"])
    section, key = dotted.split(".", 1)
    if section not in _SECTIONS:
        raise ConfigError([f"{dotted}: unknown section '{section}'"])
    if key not in {f.name for f in fields(_SECTIONS[section])}:
        raise ConfigError([f"{dotted}: unknown key"])


def apply_overrides(raw: dict[str, dict[str, str]], overrides) -> dict[str, dict[str, str]]:
    """Apply ``section.key=value`` strings in order (last one wins)."""
    out = {s: dict(v) for s, v in raw.items()}
    for item in overrides:
        if "=" not in item:
            raise ConfigError([f"override '{item}' is not of the form section.key=value"])
        lhs, rhs = (s.strip() for s in item.split("=", 1))
        _check_key(lhs)
        section, key = lhs.split(".", 1)
        out.setdefault(section, {})[key] = rhs
    return out


def _parse_list(text: str, conv) -> tuple:
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        # start:stop:count, endpoints included
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("range must be start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count == 1:
            return (conv(start),)
        step = (stop - start) / (count - 1)
        return tuple(conv(start + i * step) for i in range(count))
    return tuple(conv(p.strip()) for p in text.split(","))


def _convert(section: str, key: str, text: str):
    ftype = {f.name: f for f in fields(_SECTIONS[section])}[key]
    default = ftype.default
    if key in _LIST_KEYS:
        conv = int if key in ("nb", "sweep_nb") else float
        return _parse_list(text, conv)
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(text)
    return float(text)


def build_configs(raw: dict[str, dict[str, str]]) -> tuple[DeviceConfig, NumericsConfig, TaskConfig]:
    values: dict[str, dict[str, Any]] = {}
    errors = []
    for section, entries in raw.items():
        values[section] = {}
        for key, text in entries.items():
            try:
                values[section][key] = _convert(section, key, text)
            except ValueError:
                errors.append(f"{section}.{key}: cannot parse '{text}'")
    if errors:
        raise ConfigError(errors)
    cfg, num = validate_config(values.get("device"), values.get("numerics"))
    task = TaskConfig(**values.get("task", {}))
    if task.temperature_k < 0:
        raise ConfigError([f"task.temperature_k must be >= 0 (got {task.temperature_k})"])
    if task.n_max < 1:
        raise ConfigError([f"task.n_max must be >= 1 (got {task.n_max})"])
    return cfg, num, task


def load_config(path=None, overrides=()) -> tuple[DeviceConfig, NumericsConfig, TaskConfig]:
    text = ""
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    raw = apply_overrides(parse_config_text(text), overrides)
    return build_configs(raw)


def format_config(cfg: DeviceConfig, num: NumericsConfig, task: TaskConfig | None = None) -> str:
    """Render configs back into the file grammar (round-trips through load_config)."""
    lines = []
    for section, obj in (("device", cfg), ("numerics", num), ("task", task)):
        if obj is None:
            continue
        for f in fields(obj):
            value = getattr(obj, f.name)
            if isinstance(value, tuple):
                text = ",".join(repr(v) for v in value)
            else:
                text = repr(value)
            lines.append(f"{section}.{f.name} = {text}")
    return "\n".join(lines) + "\n"

