"""Kernel backend selection.

The compiled extension is preferred; ``ROUGHWAVE_BACKEND=python`` forces the
numpy fallback, which is also used when the extension was not built.
"""

import os

from . import _core_py

_forced = os.environ.get("ROUGHWAVE_BACKEND", "").strip().lower()

if _forced == "python":
    _impl = _core_py
    NAME = "python"
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _core_py
        NAME = "python"
    else:
        NAME = "cython"

integrate_rays = _impl.integrate_rays
osc_sum = _impl.osc_sum
rhs = _impl.rhs


def get(name):
    """Return the kernel module called ``name`` ('python' or 'cython')."""
    if name == "python":
        return _core_py
    if name == "cython":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")
