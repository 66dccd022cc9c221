import pytest

from wittflow import verify


@pytest.fixture(scope="session", autouse=True)
def calibrated_convention():
    """Integral operators refuse to run without a calibrated convention."""
    return verify.ensure_convention()
