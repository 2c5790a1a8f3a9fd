"""Hot loops with a compiled implementation and a pure-Python twin.

The compiled module is used when it imports and ``GAPGRAPH_PURE_PYTHON`` is
unset (or ``0``); otherwise the fallback in :mod:`._boxqp_py` is used.
``BACKEND`` names the selected implementation.
"""

import os

from . import _boxqp_py

_force_py = os.environ.get("GAPGRAPH_PURE_PYTHON", "0") not in ("", "0")

try:
    if _force_py:
        raise ImportError("pure-Python backend forced")
    from . import _boxqp as _compiled
except ImportError:
    _compiled = None

if _compiled is not None:
    box_qp_cd = _compiled.box_qp_cd
    BACKEND = "cython"
else:
    box_qp_cd = _boxqp_py.box_qp_cd
    BACKEND = "python"

box_qp_cd_py = _boxqp_py.box_qp_cd

__all__ = ["BACKEND", "box_qp_cd", "box_qp_cd_py"]
