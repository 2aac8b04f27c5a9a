"""Flat ``key = value`` configuration files.

Keys are the :class:`~magmech.params.PhysicalParams` field names.  Angular
quantities may instead be written with a ``_hz_over_2pi`` suffix, in which
case the value is multiplied by 2 pi on load.  Keys not listed fall back to
:func:`~magmech.params.default_params`.  ``#`` starts a comment.
"""
from __future__ import annotations

import dataclasses
import hashlib
import os
from importlib import resources

from .params import ANGULAR_FIELDS, TWO_PI, PhysicalParams, default_params

HZ_SUFFIX = "_hz_over_2pi"


class ConfigError(ValueError):
    pass


def parse_key_values(text: str, source: str = "<string>") -> dict[str, str]:
    """Split config text into an ordered ``{key: raw_value}`` mapping."""
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in entries:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


def params_from_mapping(entries: dict[str, str], base: PhysicalParams | None = None,
                        source: str = "<string>") -> PhysicalParams:
    fields = {f.name for f in dataclasses.fields(PhysicalParams)}
    values = (base or default_params()).as_dict()
    seen: dict[str, str] = {}
    for key, raw in entries.items():
        if key.endswith(HZ_SUFFIX) and key[: -len(HZ_SUFFIX)] in ANGULAR_FIELDS:
            name, scale = key[: -len(HZ_SUFFIX)], TWO_PI
        elif key in fields:
            name, scale = key, 1.0
        else:
            raise ConfigError(f"{source}: unknown key {key!r}")
        if name in seen:
            raise ConfigError(f"{source}: {name!r} given twice (as {seen[name]!r} and {key!r})")
        seen[name] = key
        try:
            values[name] = float(raw) * scale
        except ValueError:
            raise ConfigError(f"{source}: key {key!r}: not a number: {raw!r}") from None
    return PhysicalParams(**values)


def loads(text: str, source: str = "<string>") -> PhysicalParams:
    return params_from_mapping(parse_key_values(text, source), source=source)


def load(path: str | os.PathLike) -> PhysicalParams:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), source=str(path))


def dumps(params: PhysicalParams) -> str:
    # plain field names keep the round trip exact
    return "".join(f"{name} = {value!r}\n" for name, value in params.as_dict().items())


def file_sha256(path: str | os.PathLike) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def data_path(name: str):
    """Path to a file shipped in ``magmech/data``."""
    return resources.files("magmech") / "data" / name
