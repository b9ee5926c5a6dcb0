import pytest

from cmaeig.domain import Ball, build_grid


@pytest.fixture(scope="session")
def disc_grid():
    """Unit disc at h = 1/64, shared across modules (construction is cheap but
    the derived stencil operators cached on the grid are not)."""
    return build_grid(Ball(n=1), 1 / 64)


@pytest.fixture(scope="session")
def disc_grid_32():
    return build_grid(Ball(n=1), 1 / 32)


@pytest.fixture(scope="session")
def ball4_grid():
    """Unit ball in C^2 at h = 0.25."""
    return build_grid(Ball(n=2), 0.25)
