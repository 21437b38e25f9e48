"""Flat ``key = value`` configuration files mapped onto dataclasses."""
from __future__ import annotations

import dataclasses
import types
import typing
from pathlib import Path


class ConfigError(ValueError):
    """Unknown key or unparsable value in a configuration source."""


def read_kv(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_overrides(items) -> dict[str, str]:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _coerce(raw: str, annotation, key: str):
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin in (typing.Union, types.UnionType):
        if raw.lower() in ("", "none", "null"):
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(raw, inner[0], key)
    if origin is tuple:
        item_type = args[0] if args else str
        return tuple(_coerce(part.strip(), item_type, key) for part in raw.split(",") if part.strip())
    try:
        if annotation is bool:
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if annotation in (int, float, str):
            return annotation(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {annotation.__name__}") from None
    return raw


def build(cls, values: dict[str, str], base=None):
    """Instantiate dataclass ``cls`` from string values, starting from ``base``."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}; valid keys: {sorted(names)}")
    parsed = {k: _coerce(v, hints[k], k) for k, v in values.items()}
    base = base if base is not None else cls()
    return dataclasses.replace(base, **parsed)


def describe(cls) -> str:
    hints = typing.get_type_hints(cls)
    lines = []
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        tname = getattr(hints[f.name], "__name__", str(hints[f.name]))
        lines.append(f"  {f.name} ({tname}, default {default!r})")
    return "\n".join(lines)
