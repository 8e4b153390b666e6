"""Backend selection for the closed-loop vector field.

The compiled extension is used when it imports; set ``DISCWALKER_PURE=1`` to
force the Python fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("DISCWALKER_PURE"):
        raise ImportError("pure backend requested")
    from . import _ckernels
except ImportError:
    _ckernels = None

ClosedLoopKernel = _ckernels.ClosedLoopKernel if _ckernels is not None else _pykernels.ClosedLoopKernel
BACKEND = "cython" if _ckernels is not None else "python"
AUX_FIELDS = _pykernels.AUX_FIELDS
PyClosedLoopKernel = _pykernels.ClosedLoopKernel


def pack_gait(g) -> np.ndarray:
    return np.concatenate([[g.qN_plus, g.qN_minus], g.href_coeffs, g.V_params])


def make_kernel(plant, ctrl, gait, gains, actuated=True, backend=None):
    """Build a kernel from model objects; ``backend`` in {None, 'python', 'cython'}."""
    cls = {
        None: ClosedLoopKernel,
        "python": _pykernels.ClosedLoopKernel,
        "cython": getattr(_ckernels, "ClosedLoopKernel", None),
    }[backend]
    if cls is None:
        raise ImportError("compiled kernels are not available")
    pp = gait.S_ppoly
    return cls(
        plant.as_array(),
        ctrl.as_array(),
        pack_gait(gait),
        pp.x,
        pp.c,
        np.array([gains.K_P, gains.K_V, gains.beta0, gains.gamma]),
        actuated,
    )
