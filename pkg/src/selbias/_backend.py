"""Kernel backend selection.

The compiled kernel (``selbias._ckernels``) is used when it was built;
otherwise the numpy fallback in ``selbias._pykernels`` takes over.  Both
expose the same ``orthant_equicorr`` signature.
"""

from contextlib import contextmanager

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

KERNELS = {"python": _pykernels.orthant_equicorr}
if _ckernels is not None:
    KERNELS["compiled"] = _ckernels.orthant_equicorr

_active = "compiled" if "compiled" in KERNELS else "python"


def available_backends():
    return tuple(KERNELS)


def active_backend():
    return _active


def set_backend(name):
    global _active
    if name not in KERNELS:
        raise ValueError(f"unknown or unavailable backend {name!r}; "
                         f"choose from {available_backends()}")
    _active = name


@contextmanager
def using_backend(name):
    """Temporarily switch backend (not thread safe; meant for tests and benchmarks)."""
    previous = _active
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def orthant_equicorr(vals, mult, c, d, halfwidth, abs_tol, rel_tol, max_nodes):
    return KERNELS[_active](vals, mult, c, d, halfwidth, abs_tol, rel_tol, max_nodes)
