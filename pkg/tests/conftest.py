import warnings

import pytest


@pytest.fixture(autouse=True)
def _quiet_epsilon_warning():
    """The default epsilon sits below the kernel's resolvable scale by design;
    the warning is tested explicitly where it matters."""
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="epsilon=")
        yield
