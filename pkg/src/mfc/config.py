"""``key = value`` run configuration files and command-line overrides."""
from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Iterable, Optional

from .errors import ConfigError
from .pipeline import RunConfig
from .shadow import ShadowMatchParams
from .spectral import ThresholdConfig

_RUN_KEYS = ("mode", "subsample", "template_path", "use_texture", "texture_subsample", "workers")
_ALIASES = {"segment": "t8", "hot_refine": "t9"}
_NULLABLE = ("subsample", "template_path")


def _coerce(raw: str, default, key: str):
    text = raw.strip()
    if key in _NULLABLE and text.lower() in ("", "none"):
        return None
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if isinstance(default, int):
            v = float(text)
            if v != int(v):
                raise ValueError(f"not an integer: {text!r}")
            return int(v)
        if isinstance(default, float):
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from None
    return text


def parse_pairs(lines: Iterable[str], source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        out[key.strip().lower()] = value.strip()
    return out


def build_config(pairs: dict[str, str], base: Optional[RunConfig] = None) -> RunConfig:
    """Apply ``pairs`` on top of ``base`` (defaults when omitted)."""
    base = base or RunConfig()
    t_over, m_over, r_over = {}, {}, {}
    t_defaults = dataclasses.asdict(base.thresholds)
    m_defaults = dataclasses.asdict(base.match)
    run_defaults = {
        "mode": base.mode,
        "subsample": 1,
        "template_path": "",
        "use_texture": base.use_texture,
        "texture_subsample": base.texture_subsample,
        "workers": base.workers,
    }
    for key, raw in pairs.items():
        key = _ALIASES.get(key, key)
        if key in t_defaults:
            t_over[key] = _coerce(raw, t_defaults[key], key)
        elif key in m_defaults:
            m_over[key] = _coerce(raw, m_defaults[key], key)
        elif key in _RUN_KEYS:
            r_over[key] = _coerce(raw, run_defaults[key], key)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return dataclasses.replace(
        base,
        thresholds=dataclasses.replace(base.thresholds, **t_over),
        match=dataclasses.replace(base.match, **m_over),
        **r_over,
    )


def load_config(path, base: Optional[RunConfig] = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return build_config(parse_pairs(path.read_text("utf-8").splitlines(), str(path)), base)


def emit_defaults() -> str:
    """Default configuration as a loadable ``key = value`` text."""
    lines = ["# detection thresholds"]
    for f in dataclasses.fields(ThresholdConfig):
        lines.append(f"{f.name} = {f.default!r}")
    lines.append("# shadow matching")
    for f in dataclasses.fields(ShadowMatchParams):
        lines.append(f"{f.name} = {f.default!r}")
    lines.append("# run")
    lines += ["mode = precise", "subsample = none", "template_path = none", "use_texture = true", "texture_subsample = 2", "workers = 1"]
    return "\n".join(lines) + "\n"
