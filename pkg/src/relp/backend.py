"""Backend selection for the hot numeric kernels.

``RELP_BACKEND=numba`` (default) compiles the kernels in :mod:`relp.kernels`
with numba; ``RELP_BACKEND=numpy`` runs the identical functions as plain
NumPy/Python. The numpy path exists as a dependency-light fallback and as the
reference implementation for the benchmark in ``benchmarks/bench_kernels.py``.
"""

import os

_VALID = ("numba", "numpy")


def selected_backend() -> str:
    name = os.environ.get("RELP_BACKEND", "numba").strip().lower()
    if name not in _VALID:
        raise RuntimeError(f"RELP_BACKEND must be one of {_VALID}, got {name!r}")
    return name


USE_NUMBA = selected_backend() == "numba"

if USE_NUMBA:
    import numba

    def jit(func=None, *, parallel=False):
        deco = numba.njit(cache=True, nogil=True, parallel=parallel)
        return deco if func is None else deco(func)

    prange = numba.prange

    def set_num_threads(n: int) -> None:
        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))

else:

    def jit(func=None, *, parallel=False):
        if func is None:
            return lambda f: f
        return func

    prange = range

    def set_num_threads(n: int) -> None:
        pass
