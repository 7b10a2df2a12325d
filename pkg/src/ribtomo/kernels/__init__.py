"""Backend dispatch for the hot numeric kernels.

Two interchangeable implementations exist: a numba-jitted one (default
when numba imports) and a pure-numpy fallback. Selection order:

1. ``use_backend("numba" | "numpy")`` called programmatically,
2. the ``RIBTOMO_BACKEND`` environment variable (``numba``/``numpy``/``auto``),
3. auto: numba if importable, else numpy.

``benchmarks/bench_kernels.py`` times both sides on identical inputs.
"""

from __future__ import annotations

import os

_impl = None
_name: str | None = None
_forced: str | None = None


def _load(name: str):
    if name == "numpy":
        from . import _numpy_impl as mod
    elif name == "numba":
        from . import _numba_impl as mod
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    return mod


def _resolve():
    global _impl, _name
    if _impl is not None:
        return _impl
    name = _forced or os.environ.get("RIBTOMO_BACKEND", "auto").lower()
    if name == "auto":
        try:
            _impl, _name = _load("numba"), "numba"
        except ImportError:
            _impl, _name = _load("numpy"), "numpy"
    else:
        _impl, _name = _load(name), name
    return _impl


def use_backend(name: str):
    """Force a backend (mainly for benchmarks and equivalence tests)."""
    global _forced, _impl
    _forced = name
    _impl = None
    _resolve()


def current_backend() -> str:
    _resolve()
    return _name


def get_impl(name: str):
    """Load a specific backend module without switching the active one."""
    return _load(name)


def line_integrals(*args, **kwargs):
    return _resolve().line_integrals(*args, **kwargs)


def backproject_view(*args, **kwargs):
    return _resolve().backproject_view(*args, **kwargs)


def conv_fwd_2d(*args, **kwargs):
    return _resolve().conv_fwd_2d(*args, **kwargs)


def conv_dw_2d(*args, **kwargs):
    return _resolve().conv_dw_2d(*args, **kwargs)


def conv_fwd_3d(*args, **kwargs):
    return _resolve().conv_fwd_3d(*args, **kwargs)


def conv_dw_3d(*args, **kwargs):
    return _resolve().conv_dw_3d(*args, **kwargs)


def set_num_threads(n: int):
    _resolve().set_num_threads(n)
