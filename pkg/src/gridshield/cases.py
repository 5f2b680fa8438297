"""Bundled benchmark cases."""

from importlib import resources
from pathlib import Path

from .grid_model import GridNetwork, parse_case_file


def case_path(name: str = "ieee30") -> Path:
    """Filesystem path of a bundled case file."""
    candidate = resources.files("gridshield.data").joinpath(f"{name}_case.m")
    with resources.as_file(candidate) as p:
        if not p.exists():
            raise FileNotFoundError(f"no bundled case named {name!r}")
        return Path(p)


def ieee30() -> GridNetwork:
    """The 30-bus transmission benchmark used throughout the experiments."""
    text = (
        resources.files("gridshield.data")
        .joinpath("ieee30_case.m")
        .read_text(encoding="utf-8")
    )
    return parse_case_file(text)
