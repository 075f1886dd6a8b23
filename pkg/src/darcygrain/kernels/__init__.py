"""Hot-kernel backend selection.

Prefers the compiled Cython extension; falls back to the numpy/scipy
implementation when the extension was not built.  ``DGRAIN_PURE_PYTHON=1``
forces the fallback.  Both backends are interchangeable and cross-checked in
the test suite; ``BACKEND`` reports which one is active.
"""

from __future__ import annotations

import os

if os.environ.get("DGRAIN_PURE_PYTHON"):
    from . import _pyimpl as _backend
else:
    try:
        from . import _impl as _backend  # type: ignore[attr-defined]
    except ImportError:
        from . import _pyimpl as _backend

BACKEND: str = _backend.BACKEND

cholesky_banded_lower = _backend.cholesky_banded_lower
solve_banded_lower = _backend.solve_banded_lower
cholesky_banded_batch = _backend.cholesky_banded_batch
solve_banded_batch = _backend.solve_banded_batch
cell_gradient_batch = _backend.cell_gradient_batch
lineal_window_count = _backend.lineal_window_count
two_point_count = _backend.two_point_count
chord_run_counts = _backend.chord_run_counts
interface_edge_count = _backend.interface_edge_count

__all__ = [
    "BACKEND",
    "cholesky_banded_lower",
    "solve_banded_lower",
    "cholesky_banded_batch",
    "solve_banded_batch",
    "cell_gradient_batch",
    "lineal_window_count",
    "two_point_count",
    "chord_run_counts",
    "interface_edge_count",
]
