"""Kernel backend selected at import time.

The compiled ``_kernels`` extension is used when it is importable; otherwise
the numpy implementation in ``_kernels_py``. Setting ``BATCHRL_PURE_PYTHON=1``
forces the numpy path (for benchmarking and cross-checking).
"""
import os

if os.environ.get("BATCHRL_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.NAME
dense_forward = _impl.dense_forward
dense_backward = _impl.dense_backward
adam_update = _impl.adam_update

ACTIVATIONS = {"identity": 0, "tanh": 1, "softmax": 2, "sigmoid": 3}
ACTIVATION_NAMES = {code: name for name, code in ACTIVATIONS.items()}
