import os

import pytest


@pytest.fixture(scope="session", autouse=True)
def env_setup():
    for key, value in (
        ("PENCILAB_LOG_LEVEL", "info"),
        ("PENCILAB_FD_STEP", "1e-4"),
        ("PENCILAB_THREADS", "1"),
        ("PENCILAB_REAL_MODE", "off"),
    ):
        os.environ.setdefault(key, value)


@pytest.fixture(autouse=True)
def fresh_settings():
    from pencilab import get_settings

    get_settings.cache_clear()
    yield
    get_settings.cache_clear()
