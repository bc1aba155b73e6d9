"""Lightweight visual speech recognition building blocks.

Ghost modules, DFC attention and partial temporal blocks, assembled into
frontend plus sequence-model architectures, with an analytic parameter
and MAC cost model and a desk-scale training harness on synthetic data.
"""

import os as _os

# Cap math-library threads before numpy loads BLAS. Default is 1 so runs
# are reproducible; set LITE_VSR_THREADS to raise the cap.
_threads = _os.environ.get("LITE_VSR_THREADS", "1")
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, _threads)

from . import backend  # noqa: E402
from .tensor import Tensor, float32, float64, no_grad  # noqa: E402
from .ops import ConvDescriptor  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "ConvDescriptor",
    "backend",
    "float32",
    "float64",
    "no_grad",
    "__version__",
]
