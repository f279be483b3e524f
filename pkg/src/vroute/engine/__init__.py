"""Engine selection: compiled kernel when available, pure Python otherwise.

The two engines implement the same algorithms with the same tie-breaking and
random streams; they differ only in speed. Selection order: an explicit
``kind`` argument, then the ``VROUTE_ENGINE`` environment variable
(``compiled`` or ``python``), then the compiled kernel if it imported.
"""

import os
from weakref import WeakKeyDictionary

from .pyengine import PyEngine
from .result import DescentResult

try:
    from ._ckernel import CEngine
    HAVE_COMPILED = True
except ImportError:
    CEngine = None
    HAVE_COMPILED = False

__all__ = ["DescentResult", "PyEngine", "CEngine", "HAVE_COMPILED",
           "available_engines", "default_engine_kind", "make_engine",
           "get_engine"]

_cache = WeakKeyDictionary()


def available_engines():
    return ("python", "compiled") if HAVE_COMPILED else ("python",)


def default_engine_kind():
    forced = os.environ.get("VROUTE_ENGINE", "").strip().lower()
    if forced:
        if forced not in ("python", "compiled"):
            raise ValueError(f"VROUTE_ENGINE must be 'python' or 'compiled', "
                             f"got {forced!r}")
        if forced == "compiled" and not HAVE_COMPILED:
            raise RuntimeError("VROUTE_ENGINE=compiled but the compiled "
                               "kernel is not installed")
        return forced
    return "compiled" if HAVE_COMPILED else "python"


def make_engine(inst, kind=None):
    """Fresh engine for an instance. One engine per concurrent run."""
    kind = kind or default_engine_kind()
    if kind == "python":
        return PyEngine(inst)
    if kind == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernel is not installed")
        return CEngine(inst)
    raise ValueError(f"unknown engine kind {kind!r}")


def get_engine(inst, kind=None):
    """Shared per-instance engine for light, non-concurrent use (tests,
    one-shot facades). Solver runs should call :func:`make_engine`."""
    kind = kind or default_engine_kind()
    per_inst = _cache.setdefault(inst, {})
    if kind not in per_inst:
        per_inst[kind] = make_engine(inst, kind)
    return per_inst[kind]
