"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise the NumPy
implementation. Set ``QCFLOW_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("QCFLOW_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass


def envelope(u, lam, q, mode, backend=None):
    impl = _pykernels if backend == "python" else _impl
    return impl.envelope(u, float(lam), float(q), mode)


def qc_scan(u, lams, tol, direction, backend=None):
    impl = _pykernels if backend == "python" else _impl
    return impl.qc_scan(u, lams, float(tol), direction)
