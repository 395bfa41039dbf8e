"""Simplex core with compiled and pure-python pivot kernels.

The compiled extension is preferred when importable; ``CONTRACTMDP_PURE=1``
in the environment forces the numpy fallback.  Benchmarks pass explicit
kernel sets instead of flipping the global selection.
"""

from __future__ import annotations

import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Kernels:
    name: str
    primal_loop: object
    dual_loop: object


def _load_pure() -> Kernels:
    from . import _pure
    return Kernels("python", _pure.primal_loop, _pure.dual_loop)


def _load_compiled() -> Kernels:
    from . import _speedups
    return Kernels("cython", _speedups.primal_loop, _speedups.dual_loop)


if os.environ.get("CONTRACTMDP_PURE"):
    _selected = _load_pure()
else:
    try:
        _selected = _load_compiled()
    except ImportError:
        _selected = _load_pure()


def get_kernels() -> Kernels:
    return _selected


def backend_name() -> str:
    return _selected.name


def available_kernels() -> dict[str, Kernels]:
    out = {"python": _load_pure()}
    try:
        out["cython"] = _load_compiled()
    except ImportError:
        pass
    return out
