"""Geometry kernel dispatch.

Imports the compiled Cython kernels when available and falls back to the
NumPy reference implementation otherwise.  Set DIVCURL_FORCE_NUMPY=1 to
force the fallback (used by the parity tests and the benchmark).
"""

import os

from . import _ref

if os.environ.get("DIVCURL_FORCE_NUMPY") == "1":
    _impl = _ref
else:
    try:
        from . import _corecy as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _ref

IMPL = _impl.IMPL
points_in_polygon = _impl.points_in_polygon
points_boundary_distance = _impl.points_boundary_distance
boxes_boundary_distance = _impl.boxes_boundary_distance


def implementations():
    """Return the available kernel modules keyed by name (for benchmarks)."""
    impls = {"numpy": _ref}
    try:
        from . import _corecy

        impls["cython"] = _corecy
    except ImportError:
        pass
    return impls
