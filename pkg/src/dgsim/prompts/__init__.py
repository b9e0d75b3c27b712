"""Prompt templates (``string.Template`` placeholders)."""
from __future__ import annotations

import hashlib
from functools import lru_cache
from importlib import resources
from pathlib import Path
from string import Template

NAMES = ("destination", "edge", "judge")


@lru_cache(maxsize=None)
def _read(name: str, directory: str | None) -> str:
    if directory:
        return (Path(directory) / f"{name}.txt").read_text(encoding="utf-8")
    return resources.files(__package__).joinpath(f"{name}.txt").read_text(encoding="utf-8")


def load(name: str, directory: str | None = None) -> Template:
    if name not in NAMES:
        raise KeyError(f"unknown prompt {name!r}")
    return Template(_read(name, directory))


def render(name: str, directory: str | None = None, **fields) -> str:
    return load(name, directory).safe_substitute(**fields)


def digest(directory: str | None = None) -> str:
    h = hashlib.sha256()
    for name in NAMES:
        h.update(_read(name, directory).encode("utf-8"))
    return h.hexdigest()
