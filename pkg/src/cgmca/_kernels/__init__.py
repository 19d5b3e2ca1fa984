"""Image-kernel backend selection.

The compiled extension is preferred; the pure NumPy fallback is used when
the extension is missing or when ``CGMCA_PURE_PYTHON=1`` is set (read once
at import time).  Both backends expose the same three callables and agree
to floating-point roundoff; ``BACKEND`` names the active one.
"""

import os

from . import _filters_np

_force_pure = os.environ.get("CGMCA_PURE_PYTHON", "").strip() not in ("", "0")

if _force_pure:
    _impl = _filters_np
    BACKEND = "numpy"
else:
    try:
        from . import _filters as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _filters_np
        BACKEND = "numpy"

wiener3x3 = _impl.wiener3x3
median3x3 = _impl.median3x3
ssim_value = _impl.ssim_value


def available_backends():
    """Importable backend modules keyed by name (for tests and benchmarks)."""
    backends = {"numpy": _filters_np}
    try:
        from . import _filters  # type: ignore[attr-defined]

        backends["cython"] = _filters
    except ImportError:
        pass
    return backends
