"""Backend selection: compiled sampling kernel when available, Python twin otherwise.

Set FEEDBACK_MARKET_FORCE_PY=1 to force the pure-Python backend (used by the
benchmark and the backend-equivalence tests).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("FEEDBACK_MARKET_FORCE_PY"):
    impl = _kernels_py
else:
    try:
        from . import _step_kernel as impl  # type: ignore[no-redef]
    except ImportError:
        impl = _kernels_py

BACKEND = impl.BACKEND_NAME

RATE_CONSTANT = _kernels_py.RATE_CONSTANT
RATE_LOGISTIC = _kernels_py.RATE_LOGISTIC
MECH_AFFINE = _kernels_py.MECH_AFFINE
MECH_LUX3 = _kernels_py.MECH_LUX3

multinomial_draw = impl.multinomial_draw
step_counts_raw = impl.step_counts_raw
sample_steps = impl.sample_steps
simulate_chain = impl.simulate_chain
