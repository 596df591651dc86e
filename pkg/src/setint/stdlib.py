"""Shipped definition files: the prelude of derived operators and the elevator model."""
from __future__ import annotations

from functools import lru_cache
from importlib import resources

from .parser import SourceProgram, parse

NAMES = ("prelude", "elevator", "elevator_lemmas", "set_theorems")


def data_text(name: str) -> str:
    if name not in NAMES:
        raise FileNotFoundError(f"no shipped file named {name!r}; choose from {', '.join(NAMES)}")
    return resources.files("setint").joinpath("data", f"{name}.slog").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def load(name: str) -> SourceProgram:
    """Parsed contents of a shipped file; ``consult`` directives resolve here too."""
    return parse(data_text(name), load)


def prelude() -> SourceProgram:
    return load("prelude")
