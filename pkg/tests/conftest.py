import os

# allow BLAS to use the available cores for the heavy training test;
# must run before litevsr (and therefore numpy) is imported
os.environ.setdefault("LITE_VSR_THREADS", str(os.cpu_count() or 1))

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
