"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. Set ``STATECAST_KERNELS=python`` to force the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

_ckernels: ModuleType | None
try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_FUNCTIONS = ("rasterize", "motion_search", "bilinear_warp", "fit_affine_charbonnier", "jacobi_fill",
              "median_filter2d")


def available_backends() -> list[str]:
    return ["cython", "python"] if _ckernels is not None else ["python"]


def get_backend(name: str) -> ModuleType:
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def _select() -> str:
    wanted = os.environ.get("STATECAST_KERNELS", "").strip().lower()
    if wanted:
        get_backend(wanted)
        return wanted
    return "cython" if _ckernels is not None else "python"


BACKEND = _select()
_impl = get_backend(BACKEND)

rasterize = _impl.rasterize
motion_search = _impl.motion_search
bilinear_warp = _impl.bilinear_warp
fit_affine_charbonnier = _impl.fit_affine_charbonnier
jacobi_fill = _impl.jacobi_fill
median_filter2d = _impl.median_filter2d

__all__ = ["BACKEND", "available_backends", "get_backend", *_FUNCTIONS]
