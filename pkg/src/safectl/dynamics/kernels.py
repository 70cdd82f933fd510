"""Select the RK4 kernel backend at import time.

Set ``SAFECTL_PURE_PYTHON=1`` to force the pure-Python fallback.
"""

import os

from . import _rk4_py

if os.environ.get("SAFECTL_PURE_PYTHON") == "1":
    _impl = _rk4_py
else:
    try:
        from . import _rk4 as _impl
    except ImportError:
        _impl = _rk4_py

rk4_integrate = _impl.rk4_integrate
rhs = _impl.rhs
BACKEND = _impl.BACKEND

CARTPOLE = _rk4_py.CARTPOLE
QUAD1D = _rk4_py.QUAD1D
QUAD2D = _rk4_py.QUAD2D
