"""Kernel backend selection.

The hot convolution kernels exist twice: a Cython extension compiled with
OpenMP (``_ckernels``) and a NumPy fallback (``pykernels``).  The compiled
module is preferred when importable; set ``LOCAUG_BACKEND=python`` or
``LOCAUG_BACKEND=compiled`` to force a choice.  Both backends are
deterministic: every output element is accumulated in a fixed order.
"""

import os

from . import pykernels

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

_forced = os.environ.get("LOCAUG_BACKEND")
if _forced not in (None, "", "compiled", "python"):
    raise RuntimeError(f"LOCAUG_BACKEND must be 'compiled' or 'python', got {_forced!r}")
if _forced == "compiled" and _ckernels is None:
    raise RuntimeError("LOCAUG_BACKEND=compiled but the extension is not built")

if _forced == "python" or _ckernels is None:
    _impl = pykernels
else:
    _impl = _ckernels

BACKEND = _impl.NAME
HAVE_COMPILED = _ckernels is not None

conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward


def get_backend(name):
    """Return a specific backend module by name ('python' or 'compiled')."""
    if name == "python":
        return pykernels
    if name == "compiled":
        if _ckernels is None:
            raise RuntimeError("compiled backend is not built")
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
