"""Flat key=value run configuration covering every tunable in the stack.

Keys are section-prefixed (e.g. ``gait.max_step_len = 0.136``); sections
map one-to-one onto the per-module parameter dataclasses. Unknown keys are
rejected. Tuple fields use comma-separated scalars, nested tuples use
semicolons between groups:

    geometry.workspace_polygon = -0.05,-0.18; 0.05,-0.18; 0.11,-0.305; -0.11,-0.305
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, replace

from .gaitgen import GaitParams
from .legkin import LegGeometry
from .policy import ActionScaling
from .reward import RewardWeights
from .runlog import text_hash
from .simenv import RandomizationConfig, SimParams
from .trainer import ArsHyperparams, EnvBundle, TrainParams


class ConfigFileError(ValueError):
    """Unparsable config text, unknown key, or bad value."""


@dataclass(frozen=True)
class RunParams:
    """Run-level knobs that belong to no single module."""

    out_dir: str = "runs"
    master_seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    geometry: LegGeometry = LegGeometry()
    gait: GaitParams = GaitParams()
    scaling: ActionScaling = ActionScaling()
    reward: RewardWeights = RewardWeights()
    sim: SimParams = SimParams()
    rand: RandomizationConfig = RandomizationConfig()
    ars: ArsHyperparams = ArsHyperparams()
    train: TrainParams = TrainParams()
    run: RunParams = RunParams()

    def bundle(self) -> EnvBundle:
        return EnvBundle(
            geometry=self.geometry,
            gait=self.gait,
            reward=self.reward,
            sim=self.sim,
            scaling=self.scaling,
        )

    def hyperparams(self) -> ArsHyperparams:
        return replace(self.ars, master_seed=self.run.master_seed)


SECTIONS = ("geometry", "gait", "scaling", "reward", "sim", "rand", "ars", "train", "run")


def _parse_scalar(text: str, kind):
    text = text.strip()
    if kind is bool:
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigFileError(f"expected boolean, got {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if kind is str:
        return text
    raise ConfigFileError(f"unsupported scalar type {kind}")


def _parse_value(text: str, default):
    """Parse by the type of the field's current/default value."""
    text = text.strip()
    if isinstance(default, bool):
        return _parse_scalar(text, bool)
    if isinstance(default, int) and not isinstance(default, bool):
        return _parse_scalar(text, int)
    if isinstance(default, float):
        return _parse_scalar(text, float)
    if isinstance(default, str):
        return text
    if default is None:
        if text.lower() in ("none", ""):
            return None
        return _parse_scalar(text, int)
    if isinstance(default, tuple):
        if default and isinstance(default[0], tuple):
            groups = [g for g in text.split(";") if g.strip()]
            return tuple(
                tuple(_parse_scalar(v, float) for v in g.split(",")) for g in groups
            )
        inner = float if (not default or isinstance(default[0], float)) else int
        return tuple(_parse_scalar(v, inner) for v in text.split(","))
    raise ConfigFileError(f"cannot parse value for default {default!r}")


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(",".join(repr(float(x)) for x in g) for g in value)
        return ",".join(repr(float(x)) if isinstance(x, float) else str(x) for x in value)
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return "none"
    return str(value)


def apply_setting(config: RunConfig, dotted_key: str, text: str) -> RunConfig:
    """Return a new config with one 'section.field' setting applied."""
    if "." not in dotted_key:
        raise ConfigFileError(f"key {dotted_key!r} must be section.field")
    section, _, name = dotted_key.partition(".")
    if section not in SECTIONS:
        raise ConfigFileError(f"unknown section {section!r}")
    sub = getattr(config, section)
    field_names = {f.name for f in dataclasses.fields(sub)}
    if name not in field_names:
        raise ConfigFileError(f"unknown key {dotted_key!r}")
    try:
        value = _parse_value(text, getattr(sub, name))
        new_sub = replace(sub, **{name: value})
    except ConfigFileError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigFileError(f"bad value for {dotted_key}: {exc}") from exc
    return replace(config, **{section: new_sub})


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    config = base or RunConfig()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigFileError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        config = apply_setting(config, key.strip(), value)
    return config


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), base)


def dump_config(config: RunConfig) -> str:
    """Canonical text form of the full resolved configuration."""
    lines = []
    for section in SECTIONS:
        sub = getattr(config, section)
        for f in dataclasses.fields(sub):
            lines.append(f"{section}.{f.name} = {_format_value(getattr(sub, f.name))}")
    return "\n".join(lines) + "\n"


def config_hash(config: RunConfig) -> str:
    """Hash of the semantic configuration: the output location does not
    change what a run computes, so it is excluded."""
    lines = [
        ln for ln in dump_config(config).splitlines()
        if not ln.startswith("run.out_dir")
    ]
    return text_hash("\n".join(lines))
