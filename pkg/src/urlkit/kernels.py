"""Backend selection for the inner loops.

The compiled extension is used when it was built; otherwise the pure-Python
reference implementation is loaded.  Setting ``URLKIT_PURE_PYTHON=1`` forces the
fallback.
"""
import os

from . import _kernels_py

if os.environ.get("URLKIT_PURE_PYTHON") == "1":
    impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as impl
        BACKEND = "cython"
    except ImportError:
        impl = _kernels_py
        BACKEND = "python"

reference = _kernels_py
