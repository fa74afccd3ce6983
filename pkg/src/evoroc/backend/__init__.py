"""Kernel backend selection.

The compiled Cython core is used for float32 work when it imported cleanly;
everything else (float64 shadow mode, missing extension) routes to the numpy
fallback. ``EVOROC_BACKEND=python`` forces the fallback, ``EVOROC_BACKEND=compiled``
makes a missing extension a hard error.
"""

import os

import numpy as np

from . import py_kernels

_force = os.environ.get("EVOROC_BACKEND", "").lower()

_compiled = None
if _force != "python":
    try:
        from . import _ckernels as _compiled
    except ImportError:
        if _force == "compiled":
            raise

BACKEND = "compiled" if _compiled is not None else "python"


def _impl(x):
    if _compiled is not None and x.dtype == np.float32:
        return _compiled
    return py_kernels


def im2col(x, k):
    return _impl(x).im2col(np.ascontiguousarray(x), k)


def col2im(cols, c, h, w, k):
    return _impl(cols).col2im(np.ascontiguousarray(cols), c, h, w, k)


def maxpool2(x):
    return _impl(x).maxpool2(np.ascontiguousarray(x))


def maxpool2_backward(dout, idx, h, w):
    return _impl(dout).maxpool2_backward(np.ascontiguousarray(dout), idx, h, w)
