"""Bundled run-off triangles.

`autobi` is the automobile bodily-injury paid-claims triangle used throughout
the tests and the README walkthrough. The remaining triangles are classic
public datasets included so the corpus ranking commands have something to
chew on out of the box. `raa` contains a genuinely decreasing cumulative cell
and must be loaded lenient; it is bundled to exercise the failure-recording
path of the corpus runner.
"""

from __future__ import annotations

from importlib import resources

from .triangle import RunOffTriangle, read_triangle_csv

_BUNDLED = {
    "autobi": "autobi.csv",
    "taylor_ashe": "taylor_ashe.csv",
    "ukmotor": "ukmotor.csv",
    "raa": "raa.csv",
}


def names() -> list[str]:
    """Names of the bundled triangles (all stored as cumulative CSVs)."""
    return sorted(_BUNDLED)


def path(name: str):
    """Filesystem path of a bundled triangle CSV."""
    try:
        fname = _BUNDLED[name]
    except KeyError:
        raise KeyError(f"no bundled dataset {name!r}; available: {', '.join(names())}")
    return resources.files("reserve_lab.data").joinpath(fname)


def load(name: str, strict: bool = True) -> RunOffTriangle:
    """Load a bundled triangle by name."""
    with resources.as_file(path(name)) as p:
        return read_triangle_csv(p, kind="cumulative", strict=strict)


def load_autobi() -> RunOffTriangle:
    """The 8x8 automobile bodily-injury cumulative paid-claims triangle."""
    return load("autobi")
