import pytest

import gridcoord.lp as lp


@pytest.fixture(scope="session", autouse=True)
def duality_gap_accounting():
    """Every LP solved anywhere in the session must close its duality gap."""
    yield
    stats = lp.solve_stats()
    assert stats["max_gap"] <= 1e-7, (
        f"duality gap {stats['max_gap']:g} observed across {stats['solves']} solves"
    )
    assert stats["max_residual"] <= 1e-7
