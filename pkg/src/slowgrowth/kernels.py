"""Backend selection for the hot kernels.

The compiled module is used when it imports cleanly; otherwise the numpy
fallback is used. Setting ``SLOWGROWTH_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("SLOWGROWTH_PURE_PYTHON"):
    try:
        from . import _kernels_c as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py

cell_gradients = _impl.cell_gradients
scatter_flux = _impl.scatter_flux
cell_stiffness = _impl.cell_stiffness
correlate_valid = _impl.correlate_valid
GAUSS_ST = _kernels_py.GAUSS_ST


def get_backend(name):
    """Return a kernel module by name ('python' or 'compiled')."""
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels_c

        return _kernels_c
    raise ValueError(f"unknown kernel backend {name!r}")
