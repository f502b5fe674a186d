"""Backend selection for the batched WLS kernel.

The compiled ``_wls`` extension is used when it imports; otherwise the numpy
implementation. Set ``WLSENO_BACKEND=numpy`` to force the fallback.
"""
from __future__ import annotations

import os

from wlseno import _wls_py

BACKEND = "numpy"
_compiled = None
if os.environ.get("WLSENO_BACKEND", "").lower() != "numpy":
    try:
        from wlseno import _wls as _compiled  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _compiled = None


def wls_solve(A, a_index, w, rhs, rank_tol=1e-10, backend: str | None = None):
    """Dispatch to the selected backend. See ``wlseno._wls_py.wls_solve``."""
    use = backend or BACKEND
    if use == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not available")
        return _compiled.wls_solve(A, a_index, w, rhs, rank_tol)
    return _wls_py.wls_solve(A, a_index, w, rhs, rank_tol)


def available_backends() -> list[str]:
    return ["numpy"] + (["cython"] if _compiled is not None else [])
