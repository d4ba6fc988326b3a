"""Backend dispatch for the ranker's hot numeric kernels.

Two interchangeable implementations exist: numba-compiled loops
(``numba_backend``) and vectorized/pure numpy (``numpy_backend``). The
environment variable ``TILERANK_BACKEND`` picks one:

  * unset / ``numba`` -- use numba, falling back to numpy only when numba
    is unavailable (unset) or erroring out (``numba``)
  * ``numpy``         -- force the pure-numpy path

Both backends implement the same four functions with identical semantics;
``benchmarks/bench_kernels.py`` times them side by side.
"""

from __future__ import annotations

import os

_requested = os.environ.get("TILERANK_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"TILERANK_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    from tilerank.kernels import numpy_backend as _backend

    BACKEND = "numpy"
elif _requested == "numba":
    from tilerank.kernels import numba_backend as _backend

    BACKEND = "numba"
else:
    try:
        from tilerank.kernels import numba_backend as _backend

        BACKEND = "numba"
    except ImportError:
        from tilerank.kernels import numpy_backend as _backend

        BACKEND = "numpy"

conv_forward = _backend.conv_forward
conv_backward = _backend.conv_backward
lstm_forward = _backend.lstm_forward
lstm_backward = _backend.lstm_backward

__all__ = [
    "BACKEND",
    "conv_forward",
    "conv_backward",
    "lstm_forward",
    "lstm_backward",
]
