"""Kernel dispatch: compiled extension when available, numpy otherwise.

Set ``EOTRACK_PURE_PYTHON=1`` before import to force the numpy path.
"""
import os

from . import _kernels_py

BACKEND = "python"
latent_sums = _kernels_py.latent_sums
admm_consensus = _kernels_py.admm_consensus

if os.environ.get("EOTRACK_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        latent_sums = _ckernels.latent_sums
        admm_consensus = _ckernels.admm_consensus

__all__ = ["BACKEND", "latent_sums", "admm_consensus"]
