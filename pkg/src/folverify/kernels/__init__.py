"""Hot numeric kernels.

Two interchangeable implementations live here: :mod:`.jit` (numba, loop
style) and :mod:`.ref` (vectorized numpy).  ``FOLVERIFY_JIT=0`` selects the
numpy path at import time; both paths follow the same arithmetic so their
outputs agree to rounding.
"""

import os

# the TBB layer shipped in some images is too old and warns on first use
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

JIT_ENABLED = numba is not None and os.environ.get("FOLVERIFY_JIT", "1").lower() not in ("0", "false", "no")

# field codes understood by the integrators
TORUS_LINEAR = 0
TORUS_REPARAM = 1
PLUG_X1 = 2
LEAF_LIFT = 3
CONSTANT = 4

from . import ref  # noqa: E402

if JIT_ENABLED:
    from . import jit as _impl
else:
    _impl = ref

pfaffian_batch = _impl.pfaffian_batch
integrate_many = _impl.integrate_many
integrate_record = _impl.integrate_record
rho_tilde_grad = _impl.rho_tilde_grad


def set_threads(n):
    """Cap the numba worker pool; no-op on the numpy path."""
    if JIT_ENABLED and n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def default_threads():
    env = os.environ.get("FOLVERIFY_THREADS")
    return int(env) if env else 1


def backend():
    return "numba" if JIT_ENABLED else "numpy"
