"""Hot kernels with a compiled core and a pure-Python fallback.

The compiled extension is used when it was built and importable; set
``HYCASIM_PURE_PYTHON=1`` to force the fallback. ``BACKEND`` names the one in
use and :func:`get_backend` returns either implementation explicitly (the
test suite runs both).
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

KERNEL_NAMES = (
    "rr_repair",
    "cr_repair",
    "augment_match",
    "surviving_prefix",
    "place_clustered",
    "mac_accumulate",
    "conv_kernel",
)


def available_backends():
    names = ["python"]
    if _ckernels is not None:
        names.append("compiled")
    return names


def get_backend(name=None):
    if name is None:
        name = BACKEND
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


if _ckernels is not None and not os.environ.get("HYCASIM_PURE_PYTHON"):
    BACKEND = "compiled"
else:
    BACKEND = "python"

_impl = get_backend(BACKEND)
rr_repair = _impl.rr_repair
cr_repair = _impl.cr_repair
augment_match = _impl.augment_match
surviving_prefix = _impl.surviving_prefix
place_clustered = _impl.place_clustered
mac_accumulate = _impl.mac_accumulate
conv_kernel = _impl.conv_kernel
