"""Backend selection for the edge feasibility kernels.

The compiled extension is used when it imports; ``SMART_PURE_PYTHON=1``
forces the pure-Python twin.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

if _ckernels is not None and not os.environ.get("SMART_PURE_PYTHON"):
    default = _ckernels
else:
    default = _pykernels

BACKEND = default.BACKEND
EdgeChecker = default.EdgeChecker
seg_disc = default.seg_disc


def available():
    return sorted(_BACKENDS)


def get_backend(name=None):
    if name is None:
        return default
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} not available; have {available()}") from None
