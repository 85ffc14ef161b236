import pytest
from hypothesis import HealthCheck, settings

from degmag import _jit

settings.register_profile("default", max_examples=40, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("default")

BACKENDS = ["numba", "numpy"] if _jit.HAVE_NUMBA else ["numpy"]


@pytest.fixture(params=BACKENDS)
def backend(request):
    prev = _jit.set_backend(request.param)
    yield request.param
    _jit.set_backend(prev)
