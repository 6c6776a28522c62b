"""Kernel selection: compiled extension if importable, numpy otherwise.

Set ``POLARITON_TRANSFER_PURE=1`` to force the numpy fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
measure_rounds = _kernels_py.measure_rounds
receiver_profile = _kernels_py.receiver_profile

if os.environ.get("POLARITON_TRANSFER_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        BACKEND = "cython"
        measure_rounds = _compiled.measure_rounds
        receiver_profile = _compiled.receiver_profile


def get_backend(name: str):
    """Return the ``(measure_rounds, receiver_profile)`` pair for ``name``."""
    if name == "python":
        return _kernels_py.measure_rounds, _kernels_py.receiver_profile
    if name == "cython":
        from . import _kernels as mod
        return mod.measure_rounds, mod.receiver_profile
    raise ValueError(f"unknown backend {name!r}")
