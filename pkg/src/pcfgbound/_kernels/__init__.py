"""Chart kernels: compiled extension when available, numpy otherwise.

Set ``PCFGBOUND_PURE_PYTHON=1`` to force the numpy fallback.
"""

import importlib
import os

from . import _pykernels

_NAMES = ("inside_chart", "outside_chart", "prefix_forward")


def load_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module("._ckernels", __name__)
    raise ValueError("unknown backend %r" % name)


def available_backends():
    out = ["python"]
    try:
        load_backend("cython")
    except ImportError:
        pass
    else:
        out.insert(0, "cython")
    return out


if os.environ.get("PCFGBOUND_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        _impl = load_backend("cython")
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"
inside_chart = _impl.inside_chart
outside_chart = _impl.outside_chart
prefix_forward = _impl.prefix_forward
