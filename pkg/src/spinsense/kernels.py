"""Kernel selection.

The compiled extension is used when it imports; otherwise (or when
``SPINSENSE_PURE_PYTHON=1``) the numpy fallback is used. ``BACKEND`` names the
active implementation.
"""

import os

from . import _kernels_py

if os.environ.get("SPINSENSE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

pair_hamiltonian = _impl.pair_hamiltonian
collective_moments = _impl.collective_moments

__all__ = ["BACKEND", "pair_hamiltonian", "collective_moments"]
