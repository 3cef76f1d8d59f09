"""Hot-loop kernel dispatch.

The Cython extension ``_ckernels`` is used when it was built; otherwise the numpy
versions in ``_pykernels`` are used. Set ``COSALIENCY_PURE_PYTHON=1`` to force the
fallback.
"""
import os

from . import _pykernels

try:
    if os.environ.get("COSALIENCY_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python kernels forced by environment")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"


def available_backends():
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out


def slic_assign(lab, centers, step, spatial_weight, backend=None):
    impl = available_backends()[backend] if backend else _impl
    return impl.slic_assign(lab, centers, int(step), float(spatial_weight))


def label_components(labels, backend=None):
    impl = available_backends()[backend] if backend else _impl
    return impl.label_components(labels)
