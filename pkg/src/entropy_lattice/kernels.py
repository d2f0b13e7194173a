"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise the numpy
fallback is loaded. Set ``ENTROPY_LATTICE_PURE=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("ENTROPY_LATTICE_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py

chunk_logsumexp = _impl.chunk_logsumexp
tree_merge = _impl.tree_merge
alias_build = _impl.alias_build
alias_draw = _impl.alias_draw

__all__ = ["BACKEND", "chunk_logsumexp", "tree_merge", "alias_build", "alias_draw"]
