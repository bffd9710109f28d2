"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when it was built; otherwise
the numpy fallback in ``_pykernels``. Set ``PBDA_PURE_PYTHON=1`` to force
the fallback.
"""

import os

from . import _pykernels

if os.environ.get("PBDA_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

cg_solve = _impl.cg_solve
roi_scores = _impl.roi_scores
stencil_matvec = _impl.stencil_matvec


def available_backends():
    """Map backend name to kernel module for every backend importable here."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
