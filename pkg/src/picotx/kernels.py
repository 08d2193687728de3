"""Backend selection for the per-sample recursions.

The compiled extension is used when it was built; otherwise the scipy/Python
fallback is used. Setting ``PICOTX_PURE_PYTHON=1`` forces the fallback.
"""
import logging
import os

from picotx import _kernels_py

log = logging.getLogger(__name__)

if os.environ.get("PICOTX_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from picotx import _kernels as _impl
    except ImportError:  # extension not built
        log.debug("compiled kernels unavailable, using fallback")
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

one_pole = _impl.one_pole
dc_block = _impl.dc_block
agc = _impl.agc

__all__ = ["BACKEND", "one_pole", "dc_block", "agc"]
