"""Numeric kernel backend selection.

The compiled Cython kernels are used when importable; otherwise the
pure-Python twins take over.  ``FOODWEIGHT_KERNELS`` forces the choice:
``auto`` (default), ``python``, or ``cython`` (raises if unavailable).
Both backends are bit-identical, so the switch affects speed only.
"""

import os

from . import pyops

_KERNEL_NAMES = (
    "dot",
    "dense_forward",
    "matvec_transpose",
    "accumulate_outer",
    "add_scaled",
    "relu",
    "relu_backward",
    "adam_update",
    "resize_bilinear",
    "avg_pool",
    "flip_horizontal",
    "normalize_affine",
    "sum_and_sumsq",
)


def _load_backend():
    choice = os.environ.get("FOODWEIGHT_KERNELS", "auto").lower()
    if choice not in ("auto", "python", "cython"):
        raise ValueError(
            f"FOODWEIGHT_KERNELS must be auto, python, or cython; got {choice!r}"
        )
    if choice == "python":
        return pyops
    try:
        from . import _cyops
        return _cyops
    except ImportError:
        if choice == "cython":
            raise
        return pyops


_impl = _load_backend()
BACKEND = _impl.BACKEND_NAME

dot = _impl.dot
dense_forward = _impl.dense_forward
matvec_transpose = _impl.matvec_transpose
accumulate_outer = _impl.accumulate_outer
add_scaled = _impl.add_scaled
relu = _impl.relu
relu_backward = _impl.relu_backward
adam_update = _impl.adam_update
resize_bilinear = _impl.resize_bilinear
avg_pool = _impl.avg_pool
flip_horizontal = _impl.flip_horizontal
normalize_affine = _impl.normalize_affine
sum_and_sumsq = _impl.sum_and_sumsq


def available_backends():
    """Names of the kernel backends importable in this environment."""
    names = ["python"]
    try:
        from . import _cyops  # noqa: F401
        names.append("cython")
    except ImportError:
        pass
    return names


def get_backend(name):
    """Return the kernel module for an explicit backend name."""
    if name == "python":
        return pyops
    if name == "cython":
        from . import _cyops
        return _cyops
    raise ValueError(f"unknown kernel backend {name!r}")
