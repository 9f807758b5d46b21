"""Kernel backend selection.

The compiled extension is used when it imports; set ``TRANSFERIDS_BACKEND=python``
to force the numpy fallback.
"""
from __future__ import annotations

import os

from transferids import _kernels_py

_forced = os.environ.get("TRANSFERIDS_BACKEND", "").lower()

if _forced == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from transferids import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        _impl = _kernels_py
        BACKEND = "python"

best_split = _impl.best_split
tree_apply = _impl.tree_apply
svm_dual_cd_epoch = _impl.svm_dual_cd_epoch


def available_backends() -> dict:
    out = {"python": _kernels_py}
    try:
        from transferids import _kernels  # type: ignore[attr-defined]

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
