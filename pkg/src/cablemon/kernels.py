"""Backend selection for the numeric hot loops.

The compiled extension is preferred. Set ``CABLEMON_PURE_PYTHON=1`` to force
the numpy fallback (the test-suite checks both give identical results).
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py


def _load() -> tuple[ModuleType, str]:
    if os.environ.get("CABLEMON_PURE_PYTHON") == "1":
        return _kernels_py, "python"
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        return _kernels_py, "python"
    return _kernels, "compiled"


_impl, BACKEND = _load()

dwt_step = _impl.dwt_step
idwt_step = _impl.idwt_step
find_peaks = _impl.find_peaks
half_widths = _impl.half_widths
occurrence_acf = _impl.occurrence_acf
kalman_step = _impl.kalman_step


def backends() -> dict[str, ModuleType]:
    """All importable implementations keyed by name, for parity tests and benchmarks."""
    out: dict[str, ModuleType] = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        out["compiled"] = _kernels
    return out
