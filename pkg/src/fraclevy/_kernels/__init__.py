"""Hot kernels, compiled when the Cython extension is built.

Set ``FRACLEVY_PURE_PYTHON=1`` before import to force the numpy fallback.
``BACKEND`` names the implementation that was selected.
"""

import os

from . import _pykernels as python

compiled = None
if os.environ.get("FRACLEVY_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

causal_convolve = _impl.causal_convolve
wick_dense = _impl.wick_dense
wick_sparse = _impl.wick_sparse


def implementations():
    """Mapping of backend name to kernel module, for cross-checks and benchmarks."""
    impls = {"python": python}
    if compiled is not None:
        impls["cython"] = compiled
    return impls
