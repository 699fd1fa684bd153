"""Kernel backend selection.

``STADIUMLAB_BACKEND`` picks the implementation of the hot grid kernels:

* ``numba`` - jitted loops (the default when numba is importable),
* ``numpy`` - pure-numpy fallback,
* ``auto``  - numba if available, else numpy.

Both backends expose the same functions and agree to rounding error;
``benchmarks/bench_kernels.py`` times them side by side.
"""

from __future__ import annotations

import os

from . import _kernels_numpy

try:
    from . import _kernels_numba
except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
    _kernels_numba = None

_BACKENDS = {"numpy": _kernels_numpy}
if _kernels_numba is not None:
    _BACKENDS["numba"] = _kernels_numba


def get_kernels(name: str | None = None):
    """Return the kernel module for ``name`` (or the env-selected default)."""
    if name is None:
        name = os.environ.get("STADIUMLAB_BACKEND", "auto").lower()
    if name == "auto":
        name = "numba" if "numba" in _BACKENDS else "numpy"
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; "
                         f"choose from {sorted(_BACKENDS)}")
    return _BACKENDS[name]


def active_backend() -> str:
    mod = get_kernels()
    return "numba" if mod is _kernels_numba else "numpy"
