"""Distance-scan backends.

The compiled Cython kernel is preferred when the extension built; the
NumPy implementation is the fallback and the reference for equivalence
tests. Both compute squared L2 distances in double precision from
float32 storage, so orderings agree to rounding. Set HDLRAG_KERNEL to
``compiled`` or ``python`` to force a backend (``compiled`` raises if
the extension is unavailable).
"""

from __future__ import annotations

import os

import numpy as np

try:
    from ._l2 import l2sq_scan as _compiled_scan
except ImportError:
    _compiled_scan = None


def _l2sq_scan_python(matrix: np.ndarray, query: np.ndarray) -> np.ndarray:
    diffs = matrix.astype(np.float64) - query
    return np.einsum("ij,ij->i", diffs, diffs)


def _l2sq_scan_compiled(matrix: np.ndarray, query: np.ndarray) -> np.ndarray:
    out = np.empty(matrix.shape[0], dtype=np.float64)
    _compiled_scan(matrix, query, out)
    return out


_BACKENDS = {"python": _l2sq_scan_python}
if _compiled_scan is not None:
    _BACKENDS["compiled"] = _l2sq_scan_compiled


def get_backend(name: str):
    """Return the named scan function; raises KeyError for unknown/unbuilt."""
    if name not in _BACKENDS:
        raise KeyError(f"kernel backend {name!r} not available (have: {sorted(_BACKENDS)})")
    return _BACKENDS[name]


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def _select() -> str:
    forced = os.environ.get("HDLRAG_KERNEL", "").strip().lower()
    if forced:
        if forced not in _BACKENDS:
            raise RuntimeError(
                f"HDLRAG_KERNEL={forced!r} but that backend is not available "
                f"(have: {sorted(_BACKENDS)})"
            )
        return forced
    return "compiled" if "compiled" in _BACKENDS else "python"


BACKEND = _select()


def l2sq_scan(matrix: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Squared L2 distance of query (float64, dim) to every row of matrix
    (float32, n x dim), computed in double precision."""
    return _BACKENDS[BACKEND](matrix, query)
