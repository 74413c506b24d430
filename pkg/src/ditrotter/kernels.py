"""Backend selection for the hot propagation kernels.

The compiled extension ``ditrotter._kernels`` is used when it imports;
otherwise the numpy implementations in ``_kernels_py`` take over.  Setting
``DITROTTER_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("DITROTTER_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

expm_herm_stack = _impl.expm_herm_stack
group_products = _impl.group_products
propagate = _impl.propagate


def backends():
    """Name -> module for every importable backend (used by tests and benchmarks)."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels
        found["cython"] = _kernels
    except ImportError:
        pass
    return found
