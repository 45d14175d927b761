"""Kernel selection.

The compiled extension is used when it was built; otherwise the numpy
implementations are used.  Setting ``SPLITSAMP_PURE=1`` forces the numpy
path, which is how the test-suite cross-checks the two.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("SPLITSAMP_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811
    except ImportError:
        _impl = _pykernels
    else:
        BACKEND = "cython"

locate = _impl.locate
reassign = _impl.reassign
group_sums = _impl.group_sums
scheme_sums = _impl.scheme_sums

__all__ = ["BACKEND", "locate", "reassign", "group_sums", "scheme_sums"]
