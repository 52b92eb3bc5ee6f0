"""Selects the compiled march kernel when available.

Set ``VISCOBEAM_BACKEND=python`` to force the pure-Python fallback.
"""

from __future__ import annotations

import os

from . import _march_py

BACKEND = "python"
march_chunk = _march_py.march_chunk

if os.environ.get("VISCOBEAM_BACKEND", "").lower() != "python":
    try:
        from . import _march  # type: ignore[attr-defined]
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        march_chunk = _march.march_chunk


def get_kernel(backend: str | None = None):
    """Kernel for ``backend`` in {None, "python", "cython"}."""
    if backend is None:
        return march_chunk
    if backend == "python":
        return _march_py.march_chunk
    if backend == "cython":
        from . import _march  # type: ignore[attr-defined]

        return _march.march_chunk
    raise ValueError(f"unknown backend {backend!r}")
