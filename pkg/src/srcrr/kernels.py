"""Backend selection for the candidate-evaluation hot loop.

The compiled extension is used when it was built; otherwise the numpy
fallback is used. Setting ``SRCRR_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("SRCRR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ("cython", "python") or the default."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def star_batch(*args):
    return _impl.star_batch(*args)


def qb_batch(*args):
    return _impl.qb_batch(*args)
