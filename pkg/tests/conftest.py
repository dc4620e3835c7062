import numpy as np
import pytest

from singmix import (
    DomainSpec,
    EllipticCoefficient,
    KernelSpec,
    build_grid,
)
from singmix.operators import assemble_operator

UNIT_SQUARE = DomainSpec("rectangle", bounds=((0.0, 1.0), (0.0, 1.0)))
UNIT_INTERVAL = DomainSpec("interval", bounds=((0.0, 1.0),))
SYM_INTERVAL = DomainSpec("interval", bounds=((-1.0, 1.0),))
UNIT_DISC = DomainSpec("disc", center=(0.0, 0.0), radius=1.0)


@pytest.fixture(scope="session")
def square16():
    return build_grid(UNIT_SQUARE, 1 / 16)


@pytest.fixture(scope="session")
def square8():
    return build_grid(UNIT_SQUARE, 1 / 8)


@pytest.fixture(scope="session")
def mixed_op16(square16):
    return assemble_operator(square16, EllipticCoefficient.identity(2),
                             KernelSpec.fractional(0.5))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
