"""Backend selection for the hot kernels.

The compiled Cython module is used when it imports; otherwise the numpy
fallback in :mod:`gandetect._pykernels` is used. Set ``GANDETECT_KERNELS``
to ``python`` to force the fallback, or to ``compiled`` to make a missing
extension an error.
"""

import os
import warnings

from . import _pykernels

_choice = os.environ.get("GANDETECT_KERNELS", "auto").lower()

if _choice == "python":
    _backend = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _backend

        BACKEND = "compiled"
    except ImportError as exc:
        if _choice == "compiled":
            raise
        warnings.warn(f"compiled kernels unavailable ({exc}); using numpy fallback")
        _backend = _pykernels
        BACKEND = "python"

fft_rows = _backend.fft_rows
median3x3 = _backend.median3x3
cooc_counts = _backend.cooc_counts
im2col = _backend.im2col
col2im = _backend.col2im


def available_backends():
    """Names of kernel modules importable in this environment."""
    names = {"python": _pykernels}
    try:
        from . import _ckernels

        names["compiled"] = _ckernels
    except ImportError:
        pass
    return names
