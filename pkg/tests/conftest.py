import pytest

from inexactfp.acceptance import AcceptanceRuns


@pytest.fixture(scope="session")
def acceptance_runs():
    """One shared cache so overlapping heavy runs are computed once."""
    return AcceptanceRuns()
