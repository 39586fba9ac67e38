"""Shared fixtures: memoized geometry builds and the acceptance summary.

The heavyweight objects (Whitney decompositions, extension geometries,
grids) are memoized per session so the module tests and the acceptance
gate share one build.  The acceptance tests additionally print a one-line
PASS/FAIL verdict per criterion at the end of the run.
"""

import os
import re
import time

import numpy as np
import pytest

from divcurl.domains import gallery
from divcurl.whitney import whitney_decompose, select_w3


FULL_ACCEPT = os.environ.get("DIVCURL_FULL_ACCEPT") == "1"

_GALLERY_PARAMS = {
    "unit_square": ("unit_square", {}),
    "l_shape": ("l_shape", {}),
    "koch3": ("koch_snowflake", {"level": 3}),
    "unit_cube": ("unit_cube", {}),
    "prism0": ("koch_cylinder_3d", {"level": 0}),
}


def make_domain(name):
    tag, params = _GALLERY_PARAMS[name]
    return gallery(tag, **params)


class WhitneyCache:
    """Build-on-demand store for decompositions shared across tests."""

    def __init__(self):
        self._domains = {}
        self._built = {}

    def domain(self, name):
        if name not in self._domains:
            self._domains[name] = make_domain(name)
        return self._domains[name]

    def pair(self, name, max_level):
        """(interior, complement) decompositions for a gallery entry."""
        key = (name, max_level)
        if key not in self._built:
            dom = self.domain(name)
            w1 = whitney_decompose(dom, "interior", max_level)
            w2 = whitney_decompose(dom, "complement", max_level)
            self._built[key] = (w1, w2)
        return self._built[key]

    def w3(self, name, max_level):
        dom = self.domain(name)
        _, w2 = self.pair(name, max_level)
        return select_w3(w2, dom.epsilon, dom.delta)

    def drop(self, name):
        """Free the 3D builds once the heavy criteria are done."""
        self._built = {k: v for k, v in self._built.items() if k[0] != name}


@pytest.fixture(scope="session")
def wcache():
    return WhitneyCache()


@pytest.fixture(scope="session")
def unit_square():
    return make_domain("unit_square")


def clear_heavy_caches():
    """Release grid / geometry / soft-distance caches between 3D configs."""
    from divcurl import fields
    from divcurl.extension import clear_geometry_cache
    from divcurl.fields import clear_grid_cache

    clear_grid_cache()
    clear_geometry_cache()
    fields._SOFT_CACHE.clear()


# --- acceptance summary -------------------------------------------------------

_CRITERION_RE = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")
_criterion_outcomes = {}


def pytest_runtest_logreport(report):
    m = _CRITERION_RE.search(report.nodeid)
    if not m:
        return
    num = int(m.group(1))
    if report.when == "call":
        _criterion_outcomes[num] = (
            "PASS" if report.outcome == "passed" else "FAIL",
            report.duration,
        )
    elif report.when == "setup" and report.outcome != "passed":
        _criterion_outcomes[num] = ("FAIL (setup)", report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _criterion_outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(_criterion_outcomes):
        verdict, duration = _criterion_outcomes[num]
        terminalreporter.write_line(
            "criterion %d: %s (%.1fs)" % (num, verdict, duration)
        )
