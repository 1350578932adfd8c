"""Backend selection for the advection kernels.

The compiled ``_core`` extension is used when importable; otherwise the
numpy implementation in ``_pycore`` is used.  Setting the environment
variable ``LOCALULAM_BACKEND=python`` forces the fallback.
"""
import os
import types

from . import _pycore

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

__all__ = ["BACKEND", "available_backends", "get_backend"]


def available_backends() -> list[str]:
    return ["cython", "python"] if _core is not None else ["python"]


def get_backend(name: str | None = None) -> types.ModuleType:
    """Kernel module for ``name`` (``"cython"``, ``"python"`` or None for the default)."""
    if name is None:
        name = BACKEND
    if name == "python":
        return _pycore
    if name == "cython":
        if _core is None:
            raise ImportError("compiled kernels are not built; reinstall with the extension enabled")
        return _core
    raise ValueError(f"unknown backend {name!r}")


_requested = os.environ.get("LOCALULAM_BACKEND", "").strip().lower()
if _requested == "python" or _core is None:
    BACKEND = "python"
else:
    BACKEND = "cython"
