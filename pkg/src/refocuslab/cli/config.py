"""Run configuration: a TOML-like plain-text format with a small grammar.

Grammar (one construct per line):

    # comment                 -- ignored, as are blank lines
    [section]                 -- section header
    key = value               -- assignment inside the current section

Values: integers (42), floats (0.5, 1e-4), booleans (true/false), quoted
strings ("two_plane"), or flat lists of those ([0.1, 0.2]).  Unknown
sections or keys are rejected; every key below has a documented default.
Flag overrides use --set section.key=value with the same value syntax.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SceneSection:
    layout: str = "two_plane"      # two_plane | three_plane | sprites
    texture: str = "noise"         # checker | noise | stripes | smooth
    width: int = 32
    height: int = 32
    channels: int = 1
    depth_near: float = 0.35       # meters
    depth_far: float = 1.2


@dataclass(frozen=True)
class LensSection:
    focal_length: float = 25.0     # mm
    f_number: float = 1.6
    sensor_width: float = 8.0      # mm
    focus_count: int = 5
    z_near: float = 0.35           # nearest focus distance, meters
    z_far: float = 1.4


@dataclass(frozen=True)
class BreathingSection:
    enabled: bool = False
    mag_span: float = 0.03
    k1_max: float = 0.04
    k2_max: float = 0.01


@dataclass(frozen=True)
class TrainSection:
    batch_size: int = 8
    uncond_prob: float = 0.1
    lr: float = 4e-4
    total_steps: int = 3000
    ema_rate: float = 1e-3
    base_width: int = 16
    depth: int = 2
    time_dim: int = 64
    t_steps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    checkpoint_every: int = 1000
    log_every: int = 10


@dataclass(frozen=True)
class SamplerSection:
    w: float = 1.5
    steps: int = 250
    ema: bool = True


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    scene: SceneSection = field(default_factory=SceneSection)
    lens: LensSection = field(default_factory=LensSection)
    breathing: BreathingSection = field(default_factory=BreathingSection)
    train: TrainSection = field(default_factory=TrainSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")).hexdigest()[:16]


def paper_preset() -> RunConfig:
    """Named preset mirroring the full-scale recipe (not exercised by tests)."""
    return RunConfig(
        scene=SceneSection(width=896, height=640, channels=3),
        lens=LensSection(focus_count=9),
        train=TrainSection(batch_size=4, lr=4e-4, total_steps=200_000, ema_rate=1e-5),
        sampler=SamplerSection(w=1.5, steps=1000),
    )


_SECTIONS = {
    "scene": SceneSection,
    "lens": LensSection,
    "breathing": BreathingSection,
    "train": TrainSection,
    "sampler": SamplerSection,
}
_TOP_KEYS = {"seed": int}


def _parse_value(text: str, where: str):
    t = text.strip()
    if not t:
        raise ConfigError(f"{where}: empty value")
    if t.startswith("[") and t.endswith("]"):
        inner = t[1:-1].strip()
        return [] if not inner else [_parse_value(v, where) for v in inner.split(",")]
    if t in ("true", "false"):
        return t == "true"
    if t.startswith('"') and t.endswith('"') and len(t) >= 2:
        return t[1:-1]
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse value {text!r}") from None


def _coerce(section: str, key: str, value, where: str):
    cls = _SECTIONS[section]
    fld = {f.name: f for f in fields(cls)}.get(key)
    if fld is None:
        raise ConfigError(f"{where}: unknown key '{key}' in section [{section}]")
    if fld.type in ("int", int) and isinstance(value, bool):
        raise ConfigError(f"{where}: key '{key}' expects int")
    if fld.type in ("int", int):
        if not isinstance(value, int):
            raise ConfigError(f"{where}: key '{key}' expects int, got {value!r}")
        return value
    if fld.type in ("float", float):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{where}: key '{key}' expects float, got {value!r}")
        return float(value)
    if fld.type in ("bool", bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: key '{key}' expects true/false, got {value!r}")
        return value
    if fld.type in ("str", str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: key '{key}' expects a quoted string, got {value!r}")
        return value
    raise ConfigError(f"{where}: unsupported field type for '{key}'")


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    sections: dict = {name: {} for name in _SECTIONS}
    top: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                raise ConfigError(f"{where}: unknown section [{name}]")
            current = name
            continue
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value'")
        key, _, value_text = line.partition("=")
        key = key.strip()
        value = _parse_value(value_text, where)
        if current is None:
            if key not in _TOP_KEYS:
                raise ConfigError(f"{where}: unknown top-level key '{key}'")
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{where}: '{key}' expects int")
            top[key] = value
        else:
            sections[current][key] = _coerce(current, key, value, where)
    return RunConfig(
        seed=top.get("seed", 0),
        **{name: _SECTIONS[name](**vals) for name, vals in sections.items()},
    )


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text(encoding="utf-8"), source=str(p))


def apply_overrides(cfg: RunConfig, overrides: list) -> RunConfig:
    """--set section.key=value (or seed=value) applied over a parsed config."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set needs section.key=value, got {item!r}")
        target, _, value_text = item.partition("=")
        value = _parse_value(value_text, f"--set {item}")
        if target.strip() == "seed":
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError("--set seed expects an int")
            cfg = replace(cfg, seed=value)
            continue
        if "." not in target:
            raise ConfigError(f"--set target must be section.key, got {target!r}")
        section, _, key = target.strip().partition(".")
        if section not in _SECTIONS:
            raise ConfigError(f"--set: unknown section '{section}'")
        coerced = _coerce(section, key, value, f"--set {item}")
        cfg = replace(cfg, **{section: replace(getattr(cfg, section), **{key: coerced})})
    return cfg
