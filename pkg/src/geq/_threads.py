"""Thread-cap pass-through, applied before the numerics stack loads.

The ``GEQ_THREADS`` environment variable caps the parallelism of the
underlying linear-algebra libraries; those libraries read their own
environment variables at import time, so the cap must be installed before
anything imports them.  This module therefore imports nothing numeric.
"""
import os

_TARGET_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)


def apply_thread_cap() -> None:
    """Propagate ``GEQ_THREADS`` to the library-specific thread variables.

    Values that are not positive integers are ignored.
    """
    cap = os.environ.get("GEQ_THREADS", "").strip()
    if cap.isdigit() and int(cap) > 0:
        for var in _TARGET_VARS:
            os.environ[var] = cap
