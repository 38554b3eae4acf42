"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise (or
when the environment variable ``QPV_LAB_PURE`` is set to a non-empty value
other than ``0``) the numpy twins in ``_pykernels`` are used.
"""

import os

from . import _pykernels


def _load():
    if os.environ.get("QPV_LAB_PURE", "0") not in ("", "0"):
        return _pykernels
    try:
        from . import _ckernels
    except ImportError:
        return _pykernels
    return _ckernels


kernels = _load()
NAME = kernels.NAME


def available():
    """Names of every importable backend, compiled first."""
    names = []
    try:
        from . import _ckernels  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    names.append("python")
    return names


def get(name):
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")
