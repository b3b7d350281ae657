import numpy as np
import pytest

from neutralspec import _kernels_py

try:
    from neutralspec import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = [pytest.param(_kernels_py, id="python")]
if _compiled is not None:
    BACKENDS.append(pytest.param(_compiled, id="compiled"))


@pytest.fixture(params=BACKENDS)
def kernels(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
