import pytest

from mtchain.catalog import bundled_catalog


@pytest.fixture(scope="session")
def catalog():
    return bundled_catalog()
