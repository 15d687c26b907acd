"""Bandit inner-loop kernels: compiled when available, pure Python otherwise.

Set ``DEALBENCH_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _bandit_py as python_impl

compiled_impl = None
if not os.environ.get("DEALBENCH_PURE_PYTHON"):
    try:
        from . import _bandit_c as compiled_impl
    except ImportError:
        compiled_impl = None

impl = compiled_impl or python_impl
BACKEND = impl.BACKEND
softmax = impl.softmax
choose = impl.choose
update = impl.update

__all__ = ["BACKEND", "choose", "compiled_impl", "impl", "python_impl", "softmax", "update"]
