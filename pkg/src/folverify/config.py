"""Run configuration: INI-style sections, unknown keys rejected, CLI overrides."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path

from .localmodel import NAMED_CONSTANTS, ModelParams, ParameterError


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridConfig:
    liouville_points: int = 1000
    normalize_points: int = 1000
    homotopy_points: int = 10_000
    homotopy_samples: int = 11
    kernel_instances: int = 10_000
    loci_points: int = 1000
    membership_points: int = 10_000
    rays: int = 60
    ray_samples: int = 80
    transversality_points: int = 10_000
    sign_map_points: int = 4000


@dataclass(frozen=True)
class FlowConfig:
    horizon: float = 1e4
    seeds: int = 500
    closure_tol: float = 1e-3
    tol: float = 1e-10
    h_max: float = 0.5
    rational_c: float = 0.5
    leaf_horizon: float = 20.0
    order_h: float = 0.4
    order_horizon: float = 20.0
    reparam_amp: float = 0.3


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    checks: str = "all"
    threads: int = 0
    gamma_order: str = "alpha_beta"
    beta_mode: str = "psi_mu"
    gamma_exact: str = "dalpha"
    margin_tol: float = 1e-6
    control_tol: float = 1e-9


_SECTIONS = {"model": ModelParams, "grids": GridConfig, "flows": FlowConfig, "run": RunSection}
_CHOICES = {
    "gamma_order": ("alpha_beta", "beta_alpha"),
    "beta_mode": ("psi_mu", "constant"),
    "gamma_exact": ("dalpha", "dalpha_tilde"),
}


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    grids: GridConfig = field(default_factory=GridConfig)
    flows: FlowConfig = field(default_factory=FlowConfig)
    run: RunSection = field(default_factory=RunSection)
    source: str | None = None

    def as_dict(self):
        return {name: {f.name: getattr(getattr(self, name), f.name) for f in fields(cls)}
                for name, cls in _SECTIONS.items()}

    def selected(self, registry):
        if self.run.checks.strip() in ("", "all"):
            return list(registry)
        wanted = [c.strip() for c in self.run.checks.split(",") if c.strip()]
        unknown = [c for c in wanted if not any(r == c or r.startswith(c + ".") for r in registry)]
        if unknown:
            raise ConfigError(f"unknown check ids: {', '.join(unknown)}")
        return [r for r in registry if any(r == c or r.startswith(c + ".") for c in wanted)]


def parse_number(text, kind):
    text = text.strip()
    if kind is int:
        try:
            return int(float(text)) if float(text).is_integer() else int(text)
        except ValueError as exc:
            raise ConfigError(f"expected an integer, got {text!r}") from exc
    if kind is float:
        if text in NAMED_CONSTANTS:
            return NAMED_CONSTANTS[text]
        try:
            return float(Fraction(text)) if "/" in text else float(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"expected a number, got {text!r}") from exc
    return text


def _coerce(cls, key, raw):
    types = {f.name: f.type for f in fields(cls)}
    if key not in types:
        raise ConfigError(f"unknown key {key!r} in [{_section_of(cls)}]")
    kind = {"int": int, "float": float, "str": str}[types[key].split(" ")[0]]
    val = parse_number(raw, kind)
    if key in _CHOICES and val not in _CHOICES[key]:
        raise ConfigError(f"{key} must be one of {', '.join(_CHOICES[key])}")
    return val


def _section_of(cls):
    return next(k for k, v in _SECTIONS.items() if v is cls)


def _locate(key):
    if "." in key:
        sec, name = key.split(".", 1)
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section {sec!r}")
        return sec, name
    hits = [s for s, cls in _SECTIONS.items() if key in {f.name for f in fields(cls)}]
    if not hits:
        raise ConfigError(f"unknown key {key!r}")
    if len(hits) > 1:
        raise ConfigError(f"ambiguous key {key!r}; qualify it as section.key")
    return hits[0], key


def load_config(path=None, overrides=()):
    values = {s: {} for s in _SECTIONS}
    if path is not None:
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        try:
            cp.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        for sec in cp.sections():
            if sec not in _SECTIONS:
                raise ConfigError(f"unknown section [{sec}]")
            for k, v in cp[sec].items():
                values[sec][k] = _coerce(_SECTIONS[sec], k, v)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        k, v = item.split("=", 1)
        sec, name = _locate(k.strip())
        values[sec][name] = _coerce(_SECTIONS[sec], name, v)
    try:
        built = {s: cls(**values[s]) for s, cls in _SECTIONS.items()}
    except ParameterError as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from exc
    return RunConfig(**built, source=str(path) if path else None)
