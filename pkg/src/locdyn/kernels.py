"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy fallback
is used.  Set ``LOCDYN_BACKEND=python`` to force the fallback, or
``LOCDYN_BACKEND=native`` to fail loudly when the extension is missing.
"""

from __future__ import annotations

import os

from . import _pykernels

python_backend = _pykernels

try:
    from . import _ckernels as native_backend
except ImportError:  # extension not built
    native_backend = None

_choice = os.environ.get("LOCDYN_BACKEND", "auto").lower()
if _choice == "python":
    backend = python_backend
elif _choice == "native":
    if native_backend is None:
        raise ImportError("LOCDYN_BACKEND=native but locdyn._ckernels is not built")
    backend = native_backend
else:
    backend = native_backend if native_backend is not None else python_backend


def get_backend(name: str | None = None):
    """Return a kernel module by name (``"native"``, ``"python"``) or the default."""
    if name is None:
        return backend
    if name == "python":
        return python_backend
    if name == "native":
        if native_backend is None:
            raise ImportError("native kernels are not built")
        return native_backend
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    return ["python"] + (["native"] if native_backend is not None else [])
