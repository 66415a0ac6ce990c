"""Kernel backend selection.

The compiled ``sebbkit._kernels`` extension is used when it imports;
otherwise the NumPy implementation in ``sebbkit._kernels_py`` takes over.
Set ``SEBBKIT_BACKEND=python`` to force the fallback.
"""
import os

from . import _kernels_py

BACKENDS = {"python": _kernels_py}

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None
else:
    BACKENDS["cython"] = _compiled

if os.environ.get("SEBBKIT_BACKEND", "").lower() == "python" or _compiled is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

_impl = BACKENDS[BACKEND]

step_filter = _impl.step_filter
scan_extrema = _impl.scan_extrema
build_boundaries = _impl.build_boundaries
segment_stats = _impl.segment_stats
merge = _impl.merge
decode_column = _impl.decode_column


def get_backend(name=None):
    """Kernel module by name (``"python"`` or ``"cython"``); default is the active one."""
    if name is None:
        return _impl
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available; have {sorted(BACKENDS)}") from None
