"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
versions in ``_pykernels`` take over. Set ``DQNFRAUD_PURE_PYTHON=1`` to force
the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
kernels = _pykernels

if os.environ.get("DQNFRAUD_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        kernels = _compiled
        BACKEND = "cython"

adam_update = kernels.adam_update
huber = kernels.huber
rolling_rates = kernels.rolling_rates

__all__ = ["BACKEND", "kernels", "adam_update", "huber", "rolling_rates"]
